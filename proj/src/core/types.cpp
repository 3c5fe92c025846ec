#include "rplids/types.hpp"

#include <cmath>

#include "rplids/error.hpp"

namespace rplids {

namespace {
constexpr std::array<std::string_view, kAttackKindCount> kNames = {"SH", "BH", "GH", "DA",
                                                                  "IR", "WH", "DS", "WP"};
}

std::string_view to_string(AttackKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

AttackKind attack_kind_from_code(int code) {
    if (code < 0 || code >= kAttackKindCount)
        throw ValidationError("attack kind code out of range: " + std::to_string(code));
    return static_cast<AttackKind>(code);
}

std::optional<AttackKind> parse_attack_kind(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name) return static_cast<AttackKind>(i);
    return std::nullopt;
}

Label Label::from_index(int idx) {
    if (idx == 0) return normal();
    return attack(attack_kind_from_code(idx - 1));
}

std::string Label::name() const {
    return is_attack() ? std::string(to_string(*kind_)) : std::string("Normal");
}

std::optional<Label> Label::parse(std::string_view name) {
    if (name == "Normal") return normal();
    if (auto k = parse_attack_kind(name)) return attack(*k);
    return std::nullopt;
}

void validate(const Instance& inst) {
    if (!(inst.timestamp >= 0.0) || !std::isfinite(inst.timestamp))
        throw ValidationError("instance timestamp must be a non-negative real");
    for (std::size_t i = 0; i < inst.features.size(); ++i)
        if (!std::isfinite(inst.features[i]))
            throw ValidationError("feature " + std::to_string(i) + " is not finite");
}

}  // namespace rplids
