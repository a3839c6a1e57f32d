#include "obree/toy_models.hpp"

#include "obree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace obree {

std::string_view to_string(ToyModelId id) {
  switch (id) {
    case ToyModelId::normal_mean: return "normal_mean";
    case ToyModelId::exp_rate: return "exp_rate";
    case ToyModelId::unif_max: return "unif_max";
  }
  return "?";
}

ToyModelId parse_toy_model_id(std::string_view name) {
  if (name == "normal_mean") return ToyModelId::normal_mean;
  if (name == "exp_rate") return ToyModelId::exp_rate;
  if (name == "unif_max") return ToyModelId::unif_max;
  throw ConfigError("model: unknown toy model '" + std::string(name) +
                    "' (expected normal_mean, exp_rate or unif_max)");
}

std::vector<double> toy_transform(ToyModelId id, double theta, std::span<const double> draws) {
  std::vector<double> out(draws.size());
  switch (id) {
    case ToyModelId::normal_mean:
      std::transform(draws.begin(), draws.end(), out.begin(), [&](double z) { return theta + z; });
      break;
    case ToyModelId::exp_rate:
      std::transform(draws.begin(), draws.end(), out.begin(),
                     [&](double u) { return -std::log(u) / theta; });
      break;
    case ToyModelId::unif_max:
      std::transform(draws.begin(), draws.end(), out.begin(), [&](double u) { return theta * u; });
      break;
  }
  return out;
}

std::vector<double> toy_simulate(ToyModelId id, double theta, std::size_t n, RandomStream& stream) {
  if (n < 1) throw std::invalid_argument("toy_simulate: n must be >= 1");
  if (id != ToyModelId::normal_mean && !(theta > 0.0))
    throw std::invalid_argument("toy_simulate: theta must be positive");
  std::vector<double> draws(n);
  if (id == ToyModelId::normal_mean)
    std::generate(draws.begin(), draws.end(), [&] { return stream.normal(); });
  else
    std::generate(draws.begin(), draws.end(), [&] { return stream.uniform(); });
  return toy_transform(id, theta, draws);
}

std::optional<double> toy_estimate(ToyModelId id, std::span<const double> sample) {
  if (sample.empty()) throw std::invalid_argument("toy_estimate: empty sample");
  const double n = static_cast<double>(sample.size());
  switch (id) {
    case ToyModelId::normal_mean:
      return std::accumulate(sample.begin(), sample.end(), 0.0) / n;
    case ToyModelId::exp_rate: {
      const double sum = std::accumulate(sample.begin(), sample.end(), 0.0);
      if (!(sum > 0.0)) return std::nullopt;
      return n / sum;
    }
    case ToyModelId::unif_max:
      return *std::max_element(sample.begin(), sample.end());
  }
  return std::nullopt;
}

double toy_exact_pi(ToyModelId id, double theta, std::size_t n) {
  const double nd = static_cast<double>(n);
  switch (id) {
    case ToyModelId::normal_mean: return theta;
    case ToyModelId::exp_rate:
      if (n < 2) throw std::invalid_argument("toy_exact_pi: exp_rate needs n >= 2");
      return theta * nd / (nd - 1.0);
    case ToyModelId::unif_max: return theta * nd / (nd + 1.0);
  }
  return theta;
}

ToyModel::ToyModel(ToyModelId id, std::size_t n) : id_(id), n_(n) {
  if (n < 1) throw std::invalid_argument("ToyModel: n must be >= 1");
  if (id == ToyModelId::exp_rate && n < 2)
    throw std::invalid_argument("ToyModel: exp_rate needs n >= 2");
}

ToyModel::Dataset ToyModel::simulate(const ParamVector& theta, RandomStream& stream) const {
  return toy_simulate(id_, theta(0), n_, stream);
}

std::optional<ParamVector> ToyModel::estimate(const Dataset& data) const {
  const auto value = toy_estimate(id_, data);
  if (!value) return std::nullopt;
  return ParamVector::Constant(1, *value);
}

std::optional<ParamVector> ToyModel::exact_pi(const ParamVector& theta) const {
  return ParamVector::Constant(1, toy_exact_pi(id_, theta(0), n_));
}

}  // namespace obree
