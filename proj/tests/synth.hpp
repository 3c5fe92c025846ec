#pragma once

#include <random>
#include <vector>

#include "rplids/types.hpp"

namespace synth {

// Two well separated Gaussian blobs in 30-D; `flip` swaps the labels.
inline rplids::Instance two_blob(std::mt19937_64& rng, bool flip, rplids::AttackKind kind = rplids::AttackKind::DA) {
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> g(0.0, 0.08);
    const bool upper = coin(rng);
    rplids::Instance x;
    for (auto& f : x.features) f = (upper ? 0.75 : 0.25) + g(rng);
    const bool attack = upper != flip;
    x.label = attack ? rplids::Label::attack(kind) : rplids::Label::normal();
    return x;
}

}  // namespace synth
