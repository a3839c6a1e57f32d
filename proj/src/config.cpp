#include "obree/config.hpp"

#include "obree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace obree {

using nlohmann::json;

std::string_view to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::mle: return "mle";
    case EstimatorId::robust: return "robust";
    case EstimatorId::obree_mle: return "obree_mle";
    case EstimatorId::obree_r: return "obree_r";
    case EstimatorId::ghq: return "ghq";
    case EstimatorId::joint_mode: return "joint_mode";
    case EstimatorId::obree_glmm: return "obree_glmm";
  }
  return "?";
}

EstimatorId parse_estimator_id(std::string_view name) {
  for (EstimatorId id : {EstimatorId::mle, EstimatorId::robust, EstimatorId::obree_mle,
                         EstimatorId::obree_r, EstimatorId::ghq, EstimatorId::joint_mode,
                         EstimatorId::obree_glmm})
    if (name == to_string(id)) return id;
  throw ConfigError("estimators: unknown estimator '" + std::string(name) + "'");
}

bool is_obree(EstimatorId id) {
  return id == EstimatorId::obree_mle || id == EstimatorId::obree_r || id == EstimatorId::obree_glmm;
}

std::string ExperimentConfig::model_name() const {
  switch (kind) {
    case ModelKind::toy: return "toy:" + std::string(to_string(toy));
    case ModelKind::logistic: return "logistic";
    case ModelKind::glmm: return "glmm";
  }
  return "?";
}

std::vector<std::string> ExperimentConfig::component_names() const {
  std::vector<std::string> names;
  switch (kind) {
    case ModelKind::toy: names.push_back("theta"); break;
    case ModelKind::logistic:
      for (std::size_t j = 1; j <= p; ++j) names.push_back("beta" + std::to_string(j));
      break;
    case ModelKind::glmm:
      for (std::size_t j = 0; j <= q; ++j) names.push_back("beta" + std::to_string(j));
      names.push_back("sigma2");
      break;
  }
  return names;
}

namespace {

// Typed access to a flat object that remembers which keys were read, so that
// leftovers can be reported as unknown.
class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {
    if (!doc.is_object()) throw ConfigError("<root>: config must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!doc_.contains(key)) throw ConfigError(key + ": required key is missing");
    return doc_.at(key);
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(key, doc_.at(key)) : fallback;
  }
  double number(const std::string& key) { return as_number(key, at(key)); }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? as_integer(key, doc_.at(key)) : fallback;
  }
  std::int64_t integer(const std::string& key) { return as_integer(key, at(key)); }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = doc_.at(key);
    if (!v.is_string()) throw ConfigError(key + ": expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = doc_.at(key);
    if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
    return v.get<bool>();
  }

  void reject_unknown(const std::string& context) const {
    for (const auto& [key, value] : doc_.items())
      if (!seen_.count(key))
        throw ConfigError(key + ": unknown key for " + context);
  }

  static double as_number(const std::string& path, const json& v) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path + ": must be finite");
    return x;
  }

  static std::int64_t as_integer(const std::string& path, const json& v) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15)
        return static_cast<std::int64_t>(x);
    }
    throw ConfigError(path + ": expected an integer");
  }

  static ParamVector as_vector(const std::string& path, const json& v) {
    if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a non-empty array of numbers");
    ParamVector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = as_number(path + "[" + std::to_string(i) + "]", v[i]);
    return out;
  }

 private:
  const json& doc_;
  std::set<std::string> seen_;
};

std::size_t positive_size(Reader& in, const std::string& key, std::int64_t fallback,
                          std::int64_t minimum = 1) {
  const std::int64_t v = in.integer(key, fallback);
  if (v < minimum) throw ConfigError(key + ": must be >= " + std::to_string(minimum));
  return static_cast<std::size_t>(v);
}

// beta as a literal vector of the given length, or the pattern
// {first_two, next_two, rest} (plus "intercept" for the GLMM).
ParamVector read_beta(Reader& in, std::size_t slopes, bool with_intercept, double first_two,
                      double next_two) {
  const std::size_t length = slopes + (with_intercept ? 1 : 0);
  if (!in.has("beta")) {
    ParamVector beta = ParamVector::Zero(static_cast<Eigen::Index>(length));
    const std::size_t shift = with_intercept ? 1 : 0;
    for (std::size_t j = 0; j < std::min<std::size_t>(slopes, 4); ++j)
      beta(static_cast<Eigen::Index>(shift + j)) = j < 2 ? first_two : next_two;
    return beta;
  }
  const json& v = in.at("beta");
  if (v.is_array()) {
    ParamVector beta = Reader::as_vector("beta", v);
    if (static_cast<std::size_t>(beta.size()) != length)
      throw ConfigError("beta: expected " + std::to_string(length) + " entries, got " +
                        std::to_string(beta.size()));
    return beta;
  }
  if (!v.is_object()) throw ConfigError("beta: expected an array or a pattern object");
  for (const auto& [key, value] : v.items())
    if (key != "first_two" && key != "next_two" && key != "rest" &&
        !(with_intercept && key == "intercept"))
      throw ConfigError("beta." + key + ": unknown pattern key");
  auto field = [&](const char* key, double fallback) {
    return v.contains(key) ? Reader::as_number(std::string("beta.") + key, v.at(key)) : fallback;
  };
  const double rest = field("rest", 0.0);
  ParamVector beta = ParamVector::Constant(static_cast<Eigen::Index>(length), rest);
  const std::size_t shift = with_intercept ? 1 : 0;
  if (with_intercept) beta(0) = field("intercept", 0.0);
  const double a = field("first_two", first_two), b = field("next_two", next_two);
  for (std::size_t j = 0; j < std::min<std::size_t>(slopes, 4); ++j)
    beta(static_cast<Eigen::Index>(shift + j)) = j < 2 ? a : b;
  return beta;
}

ParamVector read_limit(const std::string& path, const json& v, Eigen::Index dim) {
  if (v.is_number()) return ParamVector::Constant(dim, Reader::as_number(path, v));
  ParamVector out = Reader::as_vector(path, v);
  if (out.size() != dim)
    throw ConfigError(path + ": expected " + std::to_string(dim) + " entries");
  return out;
}

DomainBounds default_bounds(const ExperimentConfig& c) {
  const Eigen::Index dim = c.theta0.size();
  switch (c.kind) {
    case ModelKind::toy:
      return c.toy == ToyModelId::normal_mean ? DomainBounds::uniform(1, -1e6, 1e6)
                                              : DomainBounds::uniform(1, 1e-6, 1e6);
    case ModelKind::logistic: return DomainBounds::uniform(dim, -100.0, 100.0);
    case ModelKind::glmm: {
      DomainBounds b = DomainBounds::uniform(dim, -100.0, 100.0);
      b.lower(dim - 1) = 0.0;
      return b;
    }
  }
  return {};
}

bool compatible(ModelKind kind, EstimatorId id) {
  switch (kind) {
    case ModelKind::toy: return id == EstimatorId::mle || id == EstimatorId::obree_mle;
    case ModelKind::logistic:
      return id == EstimatorId::mle || id == EstimatorId::robust || id == EstimatorId::obree_mle ||
             id == EstimatorId::obree_r;
    case ModelKind::glmm:
      return id == EstimatorId::ghq || id == EstimatorId::joint_mode ||
             id == EstimatorId::obree_glmm;
  }
  return false;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  Reader in(doc);
  ExperimentConfig c;

  const std::string model = in.string("model", "");
  if (model.empty()) throw ConfigError("model: required key is missing");
  if (model.rfind("toy:", 0) == 0) {
    c.kind = ModelKind::toy;
    c.toy = parse_toy_model_id(model.substr(4));
  } else if (model == "logistic") {
    c.kind = ModelKind::logistic;
  } else if (model == "glmm") {
    c.kind = ModelKind::glmm;
  } else {
    throw ConfigError("model: expected 'toy:<id>', 'logistic' or 'glmm', got '" + model + "'");
  }

  const std::string scale = in.string("scale", "desk");
  if (scale == "desk") c.scale = ScalePreset::desk;
  else if (scale == "paper") c.scale = ScalePreset::paper;
  else throw ConfigError("scale: expected 'desk' or 'paper'");
  const bool paper = c.scale == ScalePreset::paper;
  const std::int64_t design_setting = in.integer("design_setting", 1);
  if (design_setting != 1 && design_setting != 2)
    throw ConfigError("design_setting: expected 1 or 2");
  c.design_setting = static_cast<int>(design_setting);
  const bool second = c.design_setting == 2;

  // estimators
  const json& est = in.at("estimators");
  if (!est.is_array()) throw ConfigError("estimators: expected an array of names");
  if (est.empty()) throw ConfigError("estimators: at least one estimator is required");
  for (std::size_t i = 0; i < est.size(); ++i) {
    const std::string path = "estimators[" + std::to_string(i) + "]";
    if (!est[i].is_string()) throw ConfigError(path + ": expected a string");
    EstimatorId id;
    try {
      id = parse_estimator_id(est[i].get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (!compatible(c.kind, id))
      throw ConfigError(path + ": estimator '" + std::string(to_string(id)) +
                        "' is incompatible with model '" + model + "'");
    if (std::find(c.estimators.begin(), c.estimators.end(), id) != c.estimators.end())
      throw ConfigError(path + ": duplicate estimator");
    c.estimators.push_back(id);
  }

  // budget
  const std::int64_t default_H = c.kind == ModelKind::glmm ? (paper ? 200 : 50) : (paper ? 500 : 50);
  const std::int64_t H = in.integer("H", default_H);
  if (H < 1) throw ConfigError("H: must be >= 1");
  c.budget.H = static_cast<int>(H);
  const std::int64_t R = in.integer("R", paper ? 1000 : 200);
  if (R < 1) throw ConfigError("R: must be >= 1");
  c.R = static_cast<int>(R);
  if (in.has("seed")) {
    const json& s = in.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw ConfigError("seed: expected a non-negative integer");
    c.budget.seed = s.get<std::uint64_t>();
  }
  c.budget.tol = in.number("tol", 1e-8);
  if (!(c.budget.tol > 0.0)) throw ConfigError("tol: must be > 0");
  const std::int64_t max_iter = in.integer("max_iter", 50);
  if (max_iter < 1) throw ConfigError("max_iter: must be >= 1");
  c.budget.max_iter = static_cast<int>(max_iter);
  c.budget.use_exact_pi = in.boolean("exact_pi", false);
  c.budget.failure_policy = parse_failure_policy(in.string("failure_policy", "drop"));
  const std::int64_t retries = in.integer("max_retries", 10);
  if (retries < 0) throw ConfigError("max_retries: must be >= 0");
  c.budget.max_retries = static_cast<int>(retries);
  if (c.budget.use_exact_pi && c.kind != ModelKind::toy)
    throw ConfigError("exact_pi: only toy models have a closed-form pi");
  c.keep_unconverged = in.boolean("keep_unconverged", false);
  c.setting = in.string("setting", "default");
  if (c.setting.empty() || c.setting.find_first_of(",\"\n\r") != std::string::npos)
    throw ConfigError("setting: must be non-empty without commas, quotes or newlines");

  switch (c.kind) {
    case ModelKind::toy: {
      c.n = positive_size(in, "n", 0, c.toy == ToyModelId::exp_rate ? 2 : 1);
      c.theta0 = Reader::as_vector("theta0", in.at("theta0"));
      if (c.theta0.size() != 1) throw ConfigError("theta0: toy models are scalar");
      break;
    }
    case ModelKind::logistic: {
      c.p = positive_size(in, "p", paper ? 200 : 20);
      c.n = positive_size(in, "n", paper ? (second ? 3000 : 2000) : (second ? 300 : 200));
      if (c.n < c.p) throw ConfigError("n: must be >= p");
      c.theta0 = read_beta(in, c.p, false, 5.0, -7.0);
      c.covariate_mean = in.number("covariate_mean", second ? 0.6 : 0.0);
      c.covariate_scale = parse_covariate_scale(in.string("covariate_scale", "variance"));
      c.contamination_rate = in.number("contamination_rate", 0.0);
      if (!(c.contamination_rate >= 0.0 && c.contamination_rate < 1.0))
        throw ConfigError("contamination_rate: must be in [0, 1)");
      if (c.contamination_rate > 0.0 && c.contamination_rate * static_cast<double>(c.n) < 2.0)
        throw ConfigError("contamination_rate: rate * n must be >= 2 (one swapped pair)");
      const std::string ranking = in.string("contamination_ranking", "true");
      if (ranking == "true") c.contamination_ranking = ContaminationRanking::true_means;
      else if (ranking == "fitted") c.contamination_ranking = ContaminationRanking::fitted_means;
      else throw ConfigError("contamination_ranking: expected 'true' or 'fitted'");
      c.huber_c = in.number("huber_c", 1.345);
      if (!(c.huber_c > 0.0)) throw ConfigError("huber_c: must be > 0");
      c.delta = in.number("delta", 0.01);
      if (!(c.delta >= 0.0 && c.delta < 0.5))
        throw ConfigError("delta: must be in [0, 0.5), got " + std::to_string(c.delta));
      break;
    }
    case ModelKind::glmm: {
      c.m = positive_size(in, "m", paper ? (second ? 50 : 5) : (second ? 5 : 10), 2);
      c.cluster_size = positive_size(in, "cluster_size", paper ? (second ? 5 : 50) : (second ? 10 : 5));
      c.q = positive_size(in, "q", paper ? 30 : 4, 0);
      if (c.m * c.cluster_size < c.q + 1) throw ConfigError("q: more coefficients than observations");
      const ParamVector beta = read_beta(in, c.q, true, 5.0, -7.0);
      const double sigma2 = in.number("sigma2", 1.5);
      if (!(sigma2 > 0.0)) throw ConfigError("sigma2: must be > 0");
      c.theta0.resize(beta.size() + 1);
      c.theta0 << beta, sigma2;
      c.covariate_mean = in.number("covariate_mean", 0.0);
      c.covariate_scale = parse_covariate_scale(in.string("covariate_scale", "variance"));
      const std::int64_t K = in.integer("ghq_nodes", 31);
      if (K < 1 || K % 2 == 0) throw ConfigError("ghq_nodes: must be odd and >= 1");
      c.ghq_nodes = static_cast<int>(K);
      c.initial_estimator = parse_glmm_estimator(in.string("initial_estimator", "joint_mode"));
      break;
    }
  }

  c.bounds = default_bounds(c);
  if (in.has("bounds")) {
    const json& b = in.at("bounds");
    if (!b.is_object()) throw ConfigError("bounds: expected {\"lower\": ..., \"upper\": ...}");
    for (const auto& [key, value] : b.items())
      if (key != "lower" && key != "upper") throw ConfigError("bounds." + key + ": unknown key");
    if (b.contains("lower")) c.bounds.lower = read_limit("bounds.lower", b.at("lower"), c.theta0.size());
    if (b.contains("upper")) c.bounds.upper = read_limit("bounds.upper", b.at("upper"), c.theta0.size());
  }
  try {
    c.bounds.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bounds: ") + e.what());
  }
  if (!c.bounds.strictly_contains(c.theta0))
    throw ConfigError(std::string(c.kind == ModelKind::toy ? "theta0" : "beta") +
                      ": true parameter must lie strictly inside bounds");

  in.reject_unknown("model '" + model + "'");
  return c;
}

ExperimentConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("<root>: malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << file.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("obree_manifest")) {
    if (!doc.contains("config")) throw ConfigError(path + ": manifest without a config");
    return parse_config(doc.at("config"));
  }
  return parse_config(doc);
}

namespace {

json to_json(const ParamVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

json export_config(const ExperimentConfig& c) {
  json out;
  out["model"] = c.model_name();
  json est = json::array();
  for (EstimatorId id : c.estimators) est.push_back(std::string(to_string(id)));
  out["estimators"] = est;
  out["R"] = c.R;
  out["H"] = c.budget.H;
  out["seed"] = c.budget.seed;
  out["tol"] = c.budget.tol;
  out["max_iter"] = c.budget.max_iter;
  out["exact_pi"] = c.budget.use_exact_pi;
  out["failure_policy"] = std::string(to_string(c.budget.failure_policy));
  out["max_retries"] = c.budget.max_retries;
  out["keep_unconverged"] = c.keep_unconverged;
  out["setting"] = c.setting;
  out["scale"] = c.scale == ScalePreset::paper ? "paper" : "desk";
  out["design_setting"] = c.design_setting;
  out["bounds"] = {{"lower", to_json(c.bounds.lower)}, {"upper", to_json(c.bounds.upper)}};
  switch (c.kind) {
    case ModelKind::toy:
      out["n"] = c.n;
      out["theta0"] = to_json(c.theta0);
      break;
    case ModelKind::logistic:
      out["n"] = c.n;
      out["p"] = c.p;
      out["beta"] = to_json(c.theta0);
      out["covariate_mean"] = c.covariate_mean;
      out["covariate_scale"] = std::string(to_string(c.covariate_scale));
      out["contamination_rate"] = c.contamination_rate;
      out["contamination_ranking"] =
          c.contamination_ranking == ContaminationRanking::true_means ? "true" : "fitted";
      out["huber_c"] = c.huber_c;
      out["delta"] = c.delta;
      break;
    case ModelKind::glmm:
      out["m"] = c.m;
      out["cluster_size"] = c.cluster_size;
      out["q"] = c.q;
      out["beta"] = to_json(c.theta0.head(c.theta0.size() - 1));
      out["sigma2"] = c.theta0(c.theta0.size() - 1);
      out["covariate_mean"] = c.covariate_mean;
      out["covariate_scale"] = std::string(to_string(c.covariate_scale));
      out["ghq_nodes"] = c.ghq_nodes;
      out["initial_estimator"] = std::string(to_string(c.initial_estimator));
      break;
  }
  return out;
}

}  // namespace obree
