#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace rplids {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xFFFFFFFFu;
inline constexpr NodeId kBroadcast = 0xFFFFFFFEu;

// Integer codes are part of the file formats; do not reorder.
enum class AttackKind : std::uint8_t {
    SH = 0,  // sinkhole
    BH = 1,  // blackhole
    GH = 2,  // grayhole
    DA = 3,  // DIS flooding
    IR = 4,  // increase rank
    WH = 5,  // wormhole
    DS = 6,  // DIO suppression
    WP = 7,  // worst parent
};

inline constexpr int kAttackKindCount = 8;
inline constexpr std::array<AttackKind, kAttackKindCount> kAllAttackKinds = {
    AttackKind::SH, AttackKind::BH, AttackKind::GH, AttackKind::DA,
    AttackKind::IR, AttackKind::WH, AttackKind::DS, AttackKind::WP};

std::string_view to_string(AttackKind kind);
AttackKind attack_kind_from_code(int code);
std::optional<AttackKind> parse_attack_kind(std::string_view name);

class Label {
public:
    constexpr Label() = default;
    static constexpr Label normal() { return Label{}; }
    static constexpr Label attack(AttackKind kind) { return Label{kind}; }

    constexpr bool is_attack() const { return kind_.has_value(); }
    constexpr bool is_normal() const { return !kind_.has_value(); }
    // Precondition: is_attack().
    constexpr AttackKind kind() const { return *kind_; }

    // +1 = normal, -1 = attack. Used only at stage boundaries that speak in signs.
    constexpr int sign() const { return is_attack() ? -1 : 1; }

    // Dense index for vote tallies: 0 = Normal, 1 + kind code for attacks.
    // Lower index wins ties.
    constexpr int index() const { return is_attack() ? 1 + static_cast<int>(*kind_) : 0; }
    static constexpr int kIndexCount = 1 + kAttackKindCount;
    static Label from_index(int idx);

    std::string name() const;
    static std::optional<Label> parse(std::string_view name);

    friend constexpr bool operator==(const Label&, const Label&) = default;

private:
    constexpr explicit Label(AttackKind kind) : kind_(kind) {}
    std::optional<AttackKind> kind_;
};

inline constexpr std::size_t kFeatureCount = 30;
using FeatureVector = std::array<double, kFeatureCount>;

struct Instance {
    FeatureVector features{};
    std::optional<Label> label;
    double timestamp = 0.0;
    NodeId sender = kNoNode;
    NodeId placement = kNoNode;  // detector that observed the packet
};

// Throws ValidationError when timestamp is negative or any feature is not finite.
void validate(const Instance& inst);

}  // namespace rplids
