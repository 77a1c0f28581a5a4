// SPDX-License-Identifier: Apache-2.0
#include "calrec/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <tuple>

#include "calrec/util/csv.hpp"

namespace calrec {
namespace {

std::string upper(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void validate(const std::vector<ProtocolRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("no protocol rows");
  for (const auto& row : rows) {
    if (row.cce < 0.0 || row.cmc < 0.0) {
      throw std::logic_error("negative coefficient in row " +
                             row.system.full_label());
    }
    if (std::abs(row.s - (row.cce + row.cmc)) > 1e-12) {
      throw std::logic_error("row violates s = cce + cmc: " +
                             row.system.full_label());
    }
  }
}

std::vector<ProtocolRow> sorted_rows(std::vector<ProtocolRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ProtocolRow& a, const ProtocolRow& b) {
              return std::tie(a.system.recommender, a.system.divergence,
                              a.system.balance, a.system.lambda) <
                     std::tie(b.system.recommender, b.system.divergence,
                              b.system.balance, b.system.lambda);
            });
  return rows;
}

const ProtocolRow& best_row(const std::vector<ProtocolRow>& rows) {
  const ProtocolRow* best = &rows.front();
  std::string best_label = best->system.label();
  for (const auto& row : rows) {
    std::string label = row.system.label();
    if (row.s < best->s ||
        (row.s == best->s &&
         std::make_pair(label, row.system.lambda) <
             std::make_pair(best_label, best->system.lambda))) {
      best = &row;
      best_label = std::move(label);
    }
  }
  return *best;
}

}  // namespace

std::string SystemId::label() const {
  return upper(divergence) + "-" + upper(balance) + "-" + recommender;
}

std::string SystemId::full_label() const {
  if (lambda.empty()) return label();
  return label() + " lambda=" + lambda;
}

double cce(const SystemEvaluation& eval) {
  if (eval.map_mean == 0.0) {
    throw std::runtime_error("undefined coefficient (zero precision)");
  }
  return eval.mace_mean / eval.map_mean;
}

double cmc(const SystemEvaluation& eval) {
  if (eval.map_mean == 0.0) {
    throw std::runtime_error("undefined coefficient (zero precision)");
  }
  return eval.mrmc_mean / eval.map_mean;
}

double performance(double cce_value, double cmc_value) {
  if (cce_value < 0.0 || cmc_value < 0.0) {
    throw std::invalid_argument("coefficients must be non-negative");
  }
  return cce_value + cmc_value;
}

SystemId decide(const std::vector<ProtocolRow>& rows) {
  validate(rows);
  return best_row(rows).system;
}

std::string decision_csv(const std::vector<ProtocolRow>& rows) {
  validate(rows);
  std::string out = "recommender,divergence,balance,lambda,cce,cmc,s\n";
  for (const auto& row : sorted_rows(rows)) {
    out += join_csv({row.system.recommender, row.system.divergence,
                     row.system.balance, row.system.lambda,
                     format_double(row.cce), format_double(row.cmc),
                     format_double(row.s)});
    out.push_back('\n');
  }
  return out;
}

std::string decision_table(const std::vector<ProtocolRow>& rows) {
  validate(rows);
  auto sorted = sorted_rows(rows);
  std::vector<std::string> recommenders;
  std::vector<std::string> combos;  // DIV-BAL[-lambda]
  for (const auto& row : sorted) {
    recommenders.push_back(row.system.recommender);
  }
  std::sort(recommenders.begin(), recommenders.end());
  recommenders.erase(std::unique(recommenders.begin(), recommenders.end()),
                     recommenders.end());
  auto combo_of = [](const SystemId& id) {
    std::string c = upper(id.divergence) + "-" + upper(id.balance);
    if (!id.lambda.empty()) c += "-" + id.lambda;
    return c;
  };
  for (const auto& row : sorted) combos.push_back(combo_of(row.system));
  std::sort(combos.begin(), combos.end());
  combos.erase(std::unique(combos.begin(), combos.end()), combos.end());

  std::map<std::pair<std::string, std::string>, std::string> cell;
  for (const auto& row : sorted) {
    cell[{combo_of(row.system), row.system.recommender}] = fixed4(row.s);
  }

  std::size_t label_width = 11;  // "combination"
  for (const auto& c : combos) label_width = std::max(label_width, c.size());
  std::vector<std::size_t> widths;
  for (const auto& rec : recommenders) {
    std::size_t w = rec.size();
    for (const auto& c : combos) {
      auto it = cell.find({c, rec});
      if (it != cell.end()) w = std::max(w, it->second.size());
    }
    widths.push_back(w);
  }

  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  std::string out = pad("combination", label_width);
  for (std::size_t i = 0; i < recommenders.size(); ++i) {
    out += "  " + pad(recommenders[i], widths[i]);
  }
  out.push_back('\n');
  for (const auto& c : combos) {
    out += pad(c, label_width);
    for (std::size_t i = 0; i < recommenders.size(); ++i) {
      auto it = cell.find({c, recommenders[i]});
      out += "  " + pad(it == cell.end() ? "-" : it->second, widths[i]);
    }
    out.push_back('\n');
  }
  out += winner_line(rows);
  out.push_back('\n');
  return out;
}

std::string winner_line(const std::vector<ProtocolRow>& rows) {
  validate(rows);
  const ProtocolRow& row = best_row(rows);
  return "winner: " + row.system.full_label() + " s=" + format_double(row.s);
}

}  // namespace calrec
