// SPDX-License-Identifier: Apache-2.0
#include "calrec/divergence.hpp"

#include <cmath>
#include <stdexcept>

namespace calrec {

DivergenceKind divergence_from_string(const std::string& name) {
  if (name == "kl") return DivergenceKind::kl;
  if (name == "he") return DivergenceKind::he;
  if (name == "chi") return DivergenceKind::chi;
  throw std::invalid_argument("unknown divergence: " + name);
}

std::string to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::kl: return "kl";
    case DivergenceKind::he: return "he";
    case DivergenceKind::chi: return "chi";
  }
  throw std::logic_error("unreachable divergence kind");
}

double divergence(DivergenceKind kind, const Distribution& p,
                  const Distribution& q) {
  if (p.probs.size() != q.probs.size()) {
    throw std::invalid_argument("divergence: mismatched universes");
  }
  const std::size_t n = p.probs.size();
  double acc = 0.0;
  switch (kind) {
    case DivergenceKind::kl:
      for (std::size_t i = 0; i < n; ++i) {
        double pi = p.probs[i];
        if (pi <= 0.0) continue;
        double qi = q.probs[i];
        if (qi <= 0.0) throw std::runtime_error("unsmoothed zero support");
        acc += pi * std::log2(pi / qi);
      }
      return acc;
    case DivergenceKind::he:
      for (std::size_t i = 0; i < n; ++i) {
        double d = std::sqrt(p.probs[i]) - std::sqrt(q.probs[i]);
        acc += d * d;
      }
      return std::sqrt(2.0 * acc);
    case DivergenceKind::chi:
      for (std::size_t i = 0; i < n; ++i) {
        double pi = p.probs[i];
        double qi = q.probs[i];
        if (qi <= 0.0) {
          if (pi <= 0.0) continue;
          throw std::runtime_error("unsmoothed zero support");
        }
        double d = pi - qi;
        acc += d * d / qi;
      }
      return acc;
  }
  throw std::logic_error("unreachable divergence kind");
}

double miscalibration(DivergenceKind kind, const Distribution& p,
                      const Distribution& q_raw, const SmoothingParams& s) {
  if (kind == DivergenceKind::he) return divergence(kind, p, q_raw);
  return divergence(kind, p, smooth(q_raw, p, s));
}

}  // namespace calrec
