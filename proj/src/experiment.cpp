// SPDX-License-Identifier: Apache-2.0
#include "calrec/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "calrec/ingest.hpp"
#include "calrec/protocol.hpp"
#include "calrec/selector.hpp"
#include "calrec/util/csv.hpp"
#include "calrec/util/parallel.hpp"
#include "calrec/util/rng.hpp"

namespace fs = std::filesystem;

namespace calrec {
namespace {

// ---- config file -----------------------------------------------------

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using IniSections = std::map<std::string, std::map<std::string, std::string>>;

IniSections parse_ini(const std::string& text, const std::string& path) {
  IniSections sections;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("bad section header at " + path + " line " +
                                 std::to_string(line_no));
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("expected key = value at " + path + " line " +
                               std::to_string(line_no));
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("empty key at " + path + " line " +
                               std::to_string(line_no));
    }
    if (!sections[section].emplace(key, value).second) {
      throw std::runtime_error("duplicate key '" + key + "' at " + path +
                               " line " + std::to_string(line_no));
    }
  }
  return sections;
}

std::vector<std::string> split_list(const std::string& value,
                                    const std::string& what) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  for (const auto& token : out) {
    if (token.empty()) throw std::runtime_error("empty entry in " + what);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& s, const std::string& context) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("bad unsigned integer '" + s + "' in " + context);
  }
  return v;
}

// Pulls keys out of the parsed file; whatever remains at the end is a typo.
class ConfigReader {
 public:
  explicit ConfigReader(IniSections sections) : sections_(std::move(sections)) {}

  std::optional<std::string> take(const std::string& section,
                                  const std::string& key) {
    auto sec = sections_.find(section);
    if (sec == sections_.end()) return std::nullopt;
    auto it = sec->second.find(key);
    if (it == sec->second.end()) return std::nullopt;
    std::string value = it->second;
    sec->second.erase(it);
    return value;
  }

  std::string take_or(const std::string& section, const std::string& key,
                      const std::string& fallback) {
    auto v = take(section, key);
    return v ? *v : fallback;
  }

  double take_double(const std::string& section, const std::string& key,
                     double fallback) {
    auto v = take(section, key);
    return v ? parse_double(*v, "[" + section + "] " + key) : fallback;
  }

  int take_int(const std::string& section, const std::string& key,
               int fallback) {
    auto v = take(section, key);
    return v ? static_cast<int>(parse_int(*v, "[" + section + "] " + key))
             : fallback;
  }

  void finish() const {
    for (const auto& [section, keys] : sections_) {
      for (const auto& [key, value] : keys) {
        throw std::runtime_error("unknown config key '" + key +
                                 "' in section [" + section + "]");
      }
    }
  }

 private:
  IniSections sections_;
};

void validate_name(const std::string& name) {
  if (name.empty()) throw std::runtime_error("empty recommender name");
  for (char c : name) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
              c == '_' || c == '+' || c == '-';
    if (!ok) {
      throw std::runtime_error("recommender name '" + name +
                               "' contains characters unfit for file names");
    }
  }
}

// ---- output layout ---------------------------------------------------

struct Paths {
  fs::path out;

  explicit Paths(const std::string& out_dir) : out(out_dir) {}

  std::string interactions() const { return (out / "dataset" / "interactions.csv").string(); }
  std::string genres() const { return (out / "dataset" / "genres.csv").string(); }
  std::string split_manifest(int r) const {
    return (out / "dataset" / ("split_r" + std::to_string(r) + ".csv")).string();
  }
  std::string candidates_csv(int r, const std::string& rec) const {
    return (out / "candidates" / ("r" + std::to_string(r) + "_" + rec + ".csv")).string();
  }
  std::string combo_name(int r, const std::string& rec, const std::string& div,
                         const std::string& bal, const std::string& lambda) const {
    return "r" + std::to_string(r) + "_" + rec + "_" + div + "_" + bal + "_" +
           lambda + ".csv";
  }
  std::string lists_csv(int r, const std::string& rec, const std::string& div,
                        const std::string& bal, const std::string& lambda) const {
    return (out / "lists" / combo_name(r, rec, div, bal, lambda)).string();
  }
  std::string eval_csv(int r, const std::string& rec, const std::string& div,
                       const std::string& bal, const std::string& lambda) const {
    return (out / "eval" / combo_name(r, rec, div, bal, lambda)).string();
  }
  std::string metrics() const { return (out / "metrics.csv").string(); }
  std::string decision() const { return (out / "decision.csv").string(); }
  std::string decision_txt() const { return (out / "decision_table.txt").string(); }
  std::string winner() const { return (out / "winner.txt").string(); }
  std::string manifest() const { return (out / "manifest.json").string(); }
};

// ---- per-repetition context -------------------------------------------

struct RepContext {
  SplitDataset ds;
  UniversePtr universe;
  BiasParams bias;
  std::map<std::string, Distribution> target;
  std::map<std::string, std::set<std::string>> train_items;
  std::map<std::string, std::set<std::string>> touched_genres;
  std::map<std::string, std::set<std::string>> test_items;
};

RepContext load_rep_context(const ExperimentConfig& cfg, const Paths& paths,
                            int r) {
  RepContext ctx;
  ctx.ds = load_split(paths.interactions(), paths.genres(),
                      paths.split_manifest(r));
  ctx.universe =
      std::make_shared<const GenreUniverse>(ctx.ds.train.genre_universe);
  ctx.bias = compute_bias_params(ctx.ds.train, cfg.bias_alpha, cfg.bias_sigma);
  for (const auto& user : ctx.ds.train.users) {
    auto rows = ctx.ds.train.interactions_of(user);
    std::vector<WeightedItem> prefs;
    prefs.reserve(rows.size());
    auto& items = ctx.train_items[user];
    auto& touched = ctx.touched_genres[user];
    for (const auto* x : rows) {
      const ItemGenres& item = ctx.ds.train.items.at(x->item_id);
      prefs.push_back({&item, x->weight});
      items.insert(x->item_id);
      touched.insert(item.genres.begin(), item.genres.end());
    }
    ctx.target.emplace(user, target_distribution(prefs, ctx.universe));
  }
  for (const auto& x : ctx.ds.test.interactions) {
    ctx.test_items[x.user_id].insert(x.item_id);
  }
  return ctx;
}

double resolve_lambda(const LambdaPolicy& policy, const RepContext& ctx,
                      const std::string& user) {
  switch (policy.kind) {
    case LambdaPolicy::Kind::constant:
      return policy.value;
    case LambdaPolicy::Kind::var:
      return lambda_var(ctx.target.at(user));
    case LambdaPolicy::Kind::cgr:
      return lambda_cgr(ctx.touched_genres.at(user), *ctx.universe);
  }
  throw std::logic_error("unreachable lambda kind");
}

// ---- interchange files -------------------------------------------------

void write_candidates_csv(const std::string& path,
                          const std::map<std::string, CandidateList>& lists) {
  std::string out = "user_id,item_id,predicted_weight,rank\n";
  for (const auto& [user, list] : lists) {
    int rank = 1;
    for (const auto& item : list.items) {
      out += join_csv({user, item.item_id, format_double(item.predicted_weight),
                       std::to_string(rank++)});
      out.push_back('\n');
    }
  }
  write_text_file(path, out);
}

// Accepts the candidates file written above or a bare external-predictions
// file without the rank column.
std::map<std::string, CandidateList> read_candidates_csv(
    const std::string& path, int candidate_size) {
  auto rows = read_delimited(path);
  if (rows.empty()) throw std::runtime_error("empty file: " + path);
  bool with_rank =
      rows[0] ==
      std::vector<std::string>{"user_id", "item_id", "predicted_weight", "rank"};
  if (!with_rank &&
      rows[0] != std::vector<std::string>{"user_id", "item_id",
                                          "predicted_weight"}) {
    throw std::runtime_error("bad header in " + path);
  }
  std::map<std::string, CandidateList> lists;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    std::string context = path + " line " + std::to_string(i + 1);
    if (row.size() != (with_rank ? 4u : 3u)) {
      throw std::runtime_error("malformed row at " + context);
    }
    double w = parse_double(row[2], context);
    if (!std::isfinite(w)) {
      throw std::runtime_error("non-finite predicted weight at " + context);
    }
    if (!seen.emplace(row[0], row[1]).second) {
      throw std::runtime_error("duplicate candidate at " + context);
    }
    auto& list = lists[row[0]];
    list.user_id = row[0];
    list.items.push_back({row[1], w});
  }
  for (auto& [user, list] : lists) {
    std::sort(list.items.begin(), list.items.end(), candidate_before);
    if (list.items.size() > static_cast<std::size_t>(candidate_size)) {
      list.items.resize(static_cast<std::size_t>(candidate_size));
    }
  }
  return lists;
}

std::map<std::string, RankedList> read_lists_csv(const std::string& path) {
  auto rows = read_delimited(path);
  if (rows.empty()) throw std::runtime_error("empty file: " + path);
  if (rows[0] != std::vector<std::string>{"user_id", "rank", "item_id",
                                          "predicted_weight",
                                          "objective_after_step"}) {
    throw std::runtime_error("bad header in " + path);
  }
  std::map<std::string, RankedList> lists;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    std::string context = path + " line " + std::to_string(i + 1);
    if (row.size() != 5) throw std::runtime_error("malformed row at " + context);
    auto& list = lists[row[0]];
    list.user_id = row[0];
    auto rank = parse_int(row[1], context);
    if (rank != static_cast<std::int64_t>(list.items.size()) + 1) {
      throw std::runtime_error("non-sequential rank at " + context);
    }
    list.items.push_back({row[2], parse_double(row[3], context)});
    list.objective_trace.push_back(parse_double(row[4], context));
  }
  return lists;
}

struct MetricsRow {
  std::string recommender, divergence, balance, lambda;
  int repetition = 0;
  double map = 0.0, mace = 0.0, mrmc = 0.0;
};

void write_metrics_csv(const std::string& path, std::vector<MetricsRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.recommender, a.divergence, a.balance, a.lambda,
                    a.repetition) < std::tie(b.recommender, b.divergence,
                                             b.balance, b.lambda, b.repetition);
  });
  std::string out = "recommender,divergence,balance,lambda,repetition,map,mace,mrmc\n";
  for (const auto& r : rows) {
    out += join_csv({r.recommender, r.divergence, r.balance, r.lambda,
                     std::to_string(r.repetition), format_double(r.map),
                     format_double(r.mace), format_double(r.mrmc)});
    out.push_back('\n');
  }
  write_text_file(path, out);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  auto rows = read_delimited(path);
  if (rows.empty()) throw std::runtime_error("empty file: " + path);
  if (rows[0] != std::vector<std::string>{"recommender", "divergence",
                                          "balance", "lambda", "repetition",
                                          "map", "mace", "mrmc"}) {
    throw std::runtime_error("bad header in " + path);
  }
  std::vector<MetricsRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    std::string context = path + " line " + std::to_string(i + 1);
    if (row.size() != 8) throw std::runtime_error("malformed row at " + context);
    MetricsRow m;
    m.recommender = row[0];
    m.divergence = row[1];
    m.balance = row[2];
    m.lambda = row[3];
    m.repetition = static_cast<int>(parse_int(row[4], context));
    m.map = parse_double(row[5], context);
    m.mace = parse_double(row[6], context);
    m.mrmc = parse_double(row[7], context);
    out.push_back(std::move(m));
  }
  return out;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::pair<double, double> rating_bounds_for(const ExperimentConfig& cfg,
                                            const InteractionTable& train) {
  if (cfg.dataset.bounds_set) {
    return {cfg.dataset.rating_min, cfg.dataset.rating_max};
  }
  Domain domain = cfg.dataset.domain();
  if (domain == Domain::movie) return {1.0, 5.0};
  double lo = train.interactions.front().weight;
  double hi = lo;
  for (const auto& x : train.interactions) {
    lo = std::min(lo, x.weight);
    hi = std::max(hi, x.weight);
  }
  if (domain == Domain::song) lo = 1.0;
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

}  // namespace

Domain DatasetSpec::domain() const {
  if (kind == "movielens") return Domain::movie;
  if (kind == "tasteprofile") return Domain::song;
  if (kind == "generic") return Domain::generic;
  throw std::runtime_error("unknown dataset kind: " + kind);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::string text = read_text_file(path);
  ConfigReader reader(parse_ini(text, path));
  ExperimentConfig cfg;
  cfg.config_text = text;

  cfg.dataset.kind = reader.take_or("dataset", "kind", "generic");
  cfg.dataset.domain();  // validates the kind
  cfg.dataset.interactions_path = reader.take_or("dataset", "interactions", "");
  cfg.dataset.genres_path = reader.take_or("dataset", "genres", "");
  cfg.dataset.preprocess.rating_cut =
      reader.take_double("dataset", "rating_cut", 4.0);
  cfg.dataset.preprocess.min_profile_size =
      reader.take_int("dataset", "min_profile_size", 30);
  cfg.dataset.preprocess.min_item_interactions =
      reader.take_int("dataset", "min_item_interactions", 3);
  cfg.dataset.preprocess.min_play_count =
      reader.take_double("dataset", "min_play_count", 3.0);
  cfg.dataset.preprocess.train_fraction =
      reader.take_double("dataset", "train_fraction", 0.7);
  auto rmin = reader.take("dataset", "rating_min");
  auto rmax = reader.take("dataset", "rating_max");
  if (rmin.has_value() != rmax.has_value()) {
    throw std::runtime_error("rating_min and rating_max must be set together");
  }
  if (rmin) {
    cfg.dataset.bounds_set = true;
    cfg.dataset.rating_min = parse_double(*rmin, "[dataset] rating_min");
    cfg.dataset.rating_max = parse_double(*rmax, "[dataset] rating_max");
    if (cfg.dataset.rating_min >= cfg.dataset.rating_max) {
      throw std::runtime_error("rating bounds must satisfy min < max");
    }
  }

  for (const auto& token :
       split_list(reader.take_or("experiment", "divergences", "kl,he,chi"),
                  "divergences")) {
    cfg.divergences.push_back(divergence_from_string(token));
  }
  for (const auto& token :
       split_list(reader.take_or("experiment", "balances", "lin,log"),
                  "balances")) {
    cfg.balances.push_back(balance_from_string(token));
  }
  for (const auto& token : split_list(
           reader.take_or("experiment", "lambdas",
                          "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0,var,cgr"),
           "lambdas")) {
    cfg.lambdas.push_back(LambdaPolicy::parse(token));
  }
  cfg.repetitions = reader.take_int("experiment", "repetitions", 3);
  cfg.n = reader.take_int("experiment", "n", 10);
  cfg.candidate_size = reader.take_int("experiment", "candidate_size", 100);
  cfg.smoothing.alpha = reader.take_double("experiment", "alpha", 0.01);
  cfg.eval_divergence = divergence_from_string(
      reader.take_or("experiment", "eval_divergence", "kl"));
  cfg.bias_alpha = reader.take_double("experiment", "bias_alpha", 0.01);
  cfg.bias_sigma = reader.take_double("experiment", "bias_sigma", 0.01);
  cfg.log_base =
      reader.take_double("experiment", "log_base", std::numbers::e);
  if (auto seed = reader.take("experiment", "seed")) {
    cfg.seed = parse_u64(*seed, "[experiment] seed");
  }
  cfg.jobs = static_cast<unsigned>(reader.take_int("experiment", "jobs", 1));
  cfg.out_dir = reader.take_or("experiment", "out", "out");

  auto names = split_list(
      reader.take_or("experiment", "recommenders",
                     "user_knn,item_knn,slope_one,funk_svd"),
      "recommenders");
  std::set<std::string> seen_names;
  for (const auto& name : names) {
    validate_name(name);
    if (!seen_names.insert(name).second) {
      throw std::runtime_error("duplicate recommender name: " + name);
    }
    std::string section = "recommender." + name;
    RecommenderConfig rc;
    rc.name = name;
    std::string algo = reader.take_or(section, "algorithm", name);
    rc.algorithm = algorithm_from_string(algo);
    rc.k_neighbors = reader.take_int(section, "k", 30);
    rc.similarity = similarity_from_string(reader.take_or(
        section, "similarity",
        rc.algorithm == Algorithm::item_knn ? "pearson" : "msd"));
    rc.factors = reader.take_int(section, "factors", 50);
    rc.epochs = reader.take_int(section, "epochs", 50);
    rc.learn_rate = reader.take_double(section, "learn_rate", 0.005);
    rc.reg = reader.take_double(section, "reg", 0.01);
    rc.predictions_path = reader.take_or(section, "predictions", "");
    rc.candidate_size = cfg.candidate_size;
    cfg.recommenders.push_back(std::move(rc));
  }
  reader.finish();

  if (cfg.divergences.empty() || cfg.balances.empty() || cfg.lambdas.empty() ||
      cfg.recommenders.empty()) {
    throw std::runtime_error("experiment axes must be non-empty");
  }
  if (cfg.repetitions < 1) throw std::runtime_error("repetitions must be >= 1");
  if (cfg.n < 1) throw std::runtime_error("n must be >= 1");
  if (cfg.candidate_size < cfg.n) {
    throw std::runtime_error("candidate_size must be >= n");
  }
  if (cfg.smoothing.alpha < 0.0 || cfg.smoothing.alpha > 1.0) {
    throw std::runtime_error("alpha must lie in [0,1]");
  }
  if (cfg.log_base <= 1.0) throw std::runtime_error("log_base must exceed 1");
  return cfg;
}

StageReport stage_preprocess(const ExperimentConfig& cfg) {
  if (cfg.dataset.interactions_path.empty() || cfg.dataset.genres_path.empty()) {
    throw std::runtime_error("dataset paths not configured");
  }
  Paths paths(cfg.out_dir);
  RawDataset raw;
  if (cfg.dataset.kind == "movielens") {
    raw = load_movielens(cfg.dataset.interactions_path, cfg.dataset.genres_path);
  } else if (cfg.dataset.kind == "tasteprofile") {
    raw = load_tasteprofile(cfg.dataset.interactions_path,
                            cfg.dataset.genres_path);
  } else {
    raw = load_generic_csv(cfg.dataset.interactions_path,
                           cfg.dataset.genres_path);
  }
  InteractionTable table =
      preprocess(raw, cfg.dataset.preprocess, cfg.dataset.domain());

  fs::create_directories(paths.out / "dataset");
  save_table(table, paths.interactions(), paths.genres());
  for (int r = 0; r < cfg.repetitions; ++r) {
    PreprocessConfig pc = cfg.dataset.preprocess;
    pc.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
    save_split_manifest(split(table, pc), paths.split_manifest(r));
  }
  return {"preprocess", {}};
}

StageReport stage_recommend(const ExperimentConfig& cfg) {
  Paths paths(cfg.out_dir);
  fs::create_directories(paths.out / "candidates");
  StageReport report{"recommend", {}};
  for (int r = 0; r < cfg.repetitions; ++r) {
    SplitDataset ds = load_split(paths.interactions(), paths.genres(),
                                 paths.split_manifest(r));
    auto [lo, hi] = rating_bounds_for(cfg, ds.train);
    std::map<std::string, std::set<std::string>> train_items;
    for (const auto& x : ds.train.interactions) {
      train_items[x.user_id].insert(x.item_id);
    }
    std::set<std::string> train_users(ds.train.users.begin(),
                                      ds.train.users.end());

    for (const auto& rec : cfg.recommenders) {
      CombinationStatus status;
      status.stage = "recommend";
      status.recommender = rec.name;
      status.repetition = r;
      try {
        std::map<std::string, CandidateList> lists;
        if (rec.algorithm == Algorithm::external) {
          if (rec.predictions_path.empty()) {
            throw std::runtime_error(
                "external recommender requires a predictions path");
          }
          lists = load_external_predictions(rec.predictions_path,
                                            cfg.candidate_size, ds.train);
          for (const auto& [user, list] : lists) {
            if (!train_users.count(user)) {
              throw std::runtime_error("unknown user in external predictions: " +
                                       user);
            }
            const auto& owned = train_items[user];
            for (const auto& item : list.items) {
              if (owned.count(item.item_id)) {
                throw std::runtime_error("external prediction repeats train item " +
                                         item.item_id + " for user " + user);
              }
            }
          }
        } else {
          RecommenderConfig rc = rec;
          rc.rating_min = lo;
          rc.rating_max = hi;
          rc.seed = mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(r)),
                             fnv1a64(rec.name));
          auto model = train(ds.train, rc);
          std::vector<CandidateList> slots(ds.train.users.size());
          parallel_for(ds.train.users.size(), cfg.jobs, [&](std::size_t i) {
            const std::string& user = ds.train.users[i];
            slots[i] = candidates(*model, user, ds.train,
                                  train_items.at(user), cfg.candidate_size);
          });
          for (auto& list : slots) lists.emplace(list.user_id, std::move(list));
        }
        write_candidates_csv(paths.candidates_csv(r, rec.name), lists);
      } catch (const std::exception& e) {
        status.ok = false;
        status.error = e.what();
      }
      report.combinations.push_back(std::move(status));
    }
  }
  return report;
}

StageReport stage_postprocess(const ExperimentConfig& cfg) {
  Paths paths(cfg.out_dir);
  fs::create_directories(paths.out / "lists");
  StageReport report{"postprocess", {}};
  for (int r = 0; r < cfg.repetitions; ++r) {
    RepContext ctx = load_rep_context(cfg, paths, r);
    for (const auto& rec : cfg.recommenders) {
      std::map<std::string, CandidateList> cands;
      std::string read_error;
      try {
        cands = read_candidates_csv(paths.candidates_csv(r, rec.name),
                                    cfg.candidate_size);
      } catch (const std::exception& e) {
        read_error = e.what();
      }
      std::vector<std::string> users;
      for (const auto& [user, list] : cands) users.push_back(user);

      for (auto div : cfg.divergences) {
        for (auto bal : cfg.balances) {
          for (const auto& lambda : cfg.lambdas) {
            CombinationStatus status;
            status.stage = "postprocess";
            status.recommender = rec.name;
            status.divergence = to_string(div);
            status.balance = to_string(bal);
            status.lambda = lambda.label;
            status.repetition = r;
            try {
              if (!read_error.empty()) throw std::runtime_error(read_error);
              TradeOffSpec spec;
              spec.balance = bal;
              spec.divergence = div;
              spec.lambda = lambda;
              spec.smoothing = cfg.smoothing;
              spec.log_base = cfg.log_base;
              std::vector<std::string> fragments(users.size());
              parallel_for(users.size(), cfg.jobs, [&](std::size_t i) {
                const std::string& user = users[i];
                auto target_it = ctx.target.find(user);
                if (target_it == ctx.target.end()) {
                  throw std::runtime_error("unknown user: " + user);
                }
                SelectionProblem prob;
                prob.candidates = &cands.at(user);
                prob.p = &target_it->second;
                prob.spec = spec;
                prob.bias = &ctx.bias;
                prob.n = cfg.n;
                prob.lambda_u = resolve_lambda(lambda, ctx, user);
                prob.catalog = &ctx.ds.train.items;
                RankedList ranked = greedy_select(prob);
                std::string& frag = fragments[i];
                for (std::size_t k = 0; k < ranked.items.size(); ++k) {
                  frag += join_csv(
                      {user, std::to_string(k + 1), ranked.items[k].item_id,
                       format_double(ranked.items[k].predicted_weight),
                       format_double(ranked.objective_trace[k])});
                  frag.push_back('\n');
                }
              });
              std::string out =
                  "user_id,rank,item_id,predicted_weight,objective_after_step\n";
              for (const auto& frag : fragments) out += frag;
              write_text_file(
                  paths.lists_csv(r, rec.name, to_string(div), to_string(bal),
                                  lambda.label),
                  out);
            } catch (const std::exception& e) {
              status.ok = false;
              status.error = e.what();
            }
            report.combinations.push_back(std::move(status));
          }
        }
      }
    }
  }
  return report;
}

StageReport stage_evaluate(const ExperimentConfig& cfg) {
  Paths paths(cfg.out_dir);
  fs::create_directories(paths.out / "eval");
  StageReport report{"evaluate", {}};
  std::vector<MetricsRow> metrics;
  const std::set<std::string> no_items;
  for (int r = 0; r < cfg.repetitions; ++r) {
    RepContext ctx = load_rep_context(cfg, paths, r);
    EvaluationConfig ecfg;
    ecfg.n = cfg.n;
    ecfg.eval_divergence = cfg.eval_divergence;
    ecfg.smoothing = cfg.smoothing;

    for (const auto& rec : cfg.recommenders) {
      for (auto div : cfg.divergences) {
        for (auto bal : cfg.balances) {
          for (const auto& lambda : cfg.lambdas) {
            CombinationStatus status;
            status.stage = "evaluate";
            status.recommender = rec.name;
            status.divergence = to_string(div);
            status.balance = to_string(bal);
            status.lambda = lambda.label;
            status.repetition = r;
            try {
              auto lists = read_lists_csv(paths.lists_csv(
                  r, rec.name, to_string(div), to_string(bal), lambda.label));
              std::vector<const RankedList*> ranked;
              for (const auto& [user, list] : lists) ranked.push_back(&list);
              std::vector<UserEvaluation> evals(ranked.size());
              parallel_for(ranked.size(), cfg.jobs, [&](std::size_t i) {
                const RankedList& list = *ranked[i];
                auto target_it = ctx.target.find(list.user_id);
                if (target_it == ctx.target.end()) {
                  throw std::runtime_error("unknown user: " + list.user_id);
                }
                auto rel_it = ctx.test_items.find(list.user_id);
                const auto& relevant =
                    rel_it == ctx.test_items.end() ? no_items : rel_it->second;
                UserEvaluation ue;
                ue.user_id = list.user_id;
                ue.ap = average_precision(list, relevant, cfg.n);
                ue.ace = ace(list, target_it->second, ecfg, ctx.ds.train.items);
                ue.rmc = rmc(list, target_it->second, ecfg, ctx.ds.train.items);
                evals[i] = std::move(ue);
              });
              std::string out = "user_id,ap,ace,rmc\n";
              for (const auto& ue : evals) {
                out += join_csv({ue.user_id, format_double(ue.ap),
                                 format_double(ue.ace), format_double(ue.rmc)});
                out.push_back('\n');
              }
              write_text_file(
                  paths.eval_csv(r, rec.name, to_string(div), to_string(bal),
                                 lambda.label),
                  out);
              SystemEvaluation agg = aggregate({evals});
              metrics.push_back({rec.name, to_string(div), to_string(bal),
                                 lambda.label, r, agg.map_mean, agg.mace_mean,
                                 agg.mrmc_mean});
            } catch (const std::exception& e) {
              status.ok = false;
              status.error = e.what();
            }
            report.combinations.push_back(std::move(status));
          }
        }
      }
    }
  }
  write_metrics_csv(paths.metrics(), std::move(metrics));
  return report;
}

StageReport stage_decide(const ExperimentConfig& cfg) {
  Paths paths(cfg.out_dir);
  auto metrics = read_metrics_csv(paths.metrics());
  if (metrics.empty()) {
    throw std::runtime_error("no metrics rows to decide over");
  }
  std::map<std::tuple<std::string, std::string, std::string, std::string>,
           std::vector<const MetricsRow*>>
      groups;
  for (const auto& row : metrics) {
    groups[{row.recommender, row.divergence, row.balance, row.lambda}]
        .push_back(&row);
  }
  std::vector<ProtocolRow> rows;
  for (const auto& [key, group] : groups) {
    SystemEvaluation eval;
    for (const auto* row : group) {
      eval.map_mean += row->map;
      eval.mace_mean += row->mace;
      eval.mrmc_mean += row->mrmc;
    }
    double n = static_cast<double>(group.size());
    eval.map_mean /= n;
    eval.mace_mean /= n;
    eval.mrmc_mean /= n;
    ProtocolRow row;
    row.system = {std::get<0>(key), std::get<1>(key), std::get<2>(key),
                  std::get<3>(key)};
    row.cce = cce(eval);
    row.cmc = cmc(eval);
    row.s = performance(row.cce, row.cmc);
    rows.push_back(std::move(row));
  }
  write_text_file(paths.decision(), decision_csv(rows));
  write_text_file(paths.decision_txt(), decision_table(rows));
  write_text_file(paths.winner(), winner_line(rows) + "\n");
  return {"decide", {}};
}

void run_all(const ExperimentConfig& cfg) {
  Paths paths(cfg.out_dir);
  using Stage = StageReport (*)(const ExperimentConfig&);
  const std::pair<const char*, Stage> stages[] = {
      {"preprocess", &stage_preprocess},
      {"recommend", &stage_recommend},
      {"postprocess", &stage_postprocess},
      {"evaluate", &stage_evaluate},
      {"decide", &stage_decide},
  };
  nlohmann::json manifest;
  std::uint64_t seed_state = cfg.seed;
  manifest["config_hash"] =
      hash_hex(fnv1a64(cfg.config_text) ^ splitmix64(seed_state));
  manifest["seed"] = cfg.seed;
  manifest["stages"] = nlohmann::json::array();
  manifest["combinations"] = nlohmann::json::array();
  for (const auto& [name, fn] : stages) {
    auto t0 = std::chrono::steady_clock::now();
    StageReport report = fn(cfg);
    auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    manifest["stages"].push_back({{"name", name}, {"wall_ms", wall_ms}});
    for (const auto& c : report.combinations) {
      nlohmann::json entry{{"stage", c.stage},
                           {"recommender", c.recommender},
                           {"divergence", c.divergence},
                           {"balance", c.balance},
                           {"lambda", c.lambda},
                           {"repetition", c.repetition},
                           {"status", c.ok ? "done" : "failed"}};
      if (!c.ok) entry["error"] = c.error;
      manifest["combinations"].push_back(std::move(entry));
    }
  }
  manifest["outputs"] = {{"dataset", (paths.out / "dataset").string()},
                         {"candidates", (paths.out / "candidates").string()},
                         {"lists", (paths.out / "lists").string()},
                         {"eval", (paths.out / "eval").string()},
                         {"metrics", paths.metrics()},
                         {"decision", paths.decision()},
                         {"decision_table", paths.decision_txt()},
                         {"winner", paths.winner()}};
  write_text_file(paths.manifest(), manifest.dump(2) + "\n");
}

}  // namespace calrec
