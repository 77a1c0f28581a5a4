// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "calrec/distribution.hpp"

namespace calrec {

enum class DivergenceKind { kl, he, chi };

DivergenceKind divergence_from_string(const std::string& name);
std::string to_string(DivergenceKind kind);

// kl:  sum of p * log2(p / q), with 0 * log2(0 / x) taken as 0
// he:  sqrt(2 * sum of (sqrt(p) - sqrt(q))^2), bounded by 2
// chi: sum of (p - q)^2 / q, terms with p = q = 0 contributing 0
// kl and chi require q > 0 wherever p > 0.
double divergence(DivergenceKind kind, const Distribution& p,
                  const Distribution& q);

// Scores a raw realized distribution against the target under one kind's
// own convention: kl and chi smooth q toward p first, he is defined on the
// unsmoothed q and ignores the smoothing parameter.
double miscalibration(DivergenceKind kind, const Distribution& p,
                      const Distribution& q_raw, const SmoothingParams& s);

}  // namespace calrec
