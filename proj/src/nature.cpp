#include "recal/nature.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "recal/errors.hpp"
#include "recal/forecasters.hpp"

namespace recal {

namespace {

struct KindName {
  NatureKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {NatureKind::kIidBernoulli, "iid-bernoulli"},
    {NatureKind::kMiscalibratedLink, "miscalibrated-link"},
    {NatureKind::kSignFlip, "sign-flip-adversary"},
    {NatureKind::kDrifting, "drifting"},
    {NatureKind::kExpertPanel, "expert-panel"},
};

// Shared draws: one standard normal and one uniform per round.
class GaussianNature : public RoundSource {
 public:
  explicit GaussianNature(std::uint64_t seed) : rng_(seed) {}

 protected:
  void draw() {
    z_ = std::normal_distribution<double>(0.0, 1.0)(rng_);
    u_ = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  }
  int bernoulli(double q) const { return u_ < q ? 1 : 0; }

  Rng rng_;
  double z_ = 0.0;
  double u_ = 0.0;
};

class LinkNature : public GaussianNature {
 public:
  LinkNature(std::uint64_t seed, double slope, double offset)
      : GaussianNature(seed), slope_(slope), offset_(offset) {}

  std::optional<std::vector<double>> reveal(std::uint64_t t) override {
    draw();
    q_ = logistic(slope_ * z_ + offset(t));
    return std::vector<double>{z_, 1.0};
  }
  int outcome(const OutcomeContext&) override { return bernoulli(q_); }

 protected:
  virtual double offset(std::uint64_t) const { return offset_; }

  double slope_;
  double offset_;
  double q_ = 0.5;
};

class IidNature : public GaussianNature {
 public:
  IidNature(std::uint64_t seed, double q) : GaussianNature(seed), q_(q) {}

  std::optional<std::vector<double>> reveal(std::uint64_t) override {
    draw();
    return std::vector<double>{z_, 1.0};
  }
  int outcome(const OutcomeContext&) override { return bernoulli(q_); }

 private:
  double q_;
};

class DriftingNature : public LinkNature {
 public:
  DriftingNature(std::uint64_t seed, double slope, double amplitude, double period)
      : LinkNature(seed, slope, 0.0), amplitude_(amplitude), period_(period) {}

 protected:
  double offset(std::uint64_t t) const override {
    return amplitude_ * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period_);
  }

 private:
  double amplitude_;
  double period_;
};

class SignFlipNature : public GaussianNature {
 public:
  using GaussianNature::GaussianNature;

  std::optional<std::vector<double>> reveal(std::uint64_t) override {
    draw();
    return std::vector<double>{z_, 1.0};
  }
  int outcome(const OutcomeContext& context) override {
    return context.expected_forecast <= 0.5 ? 1 : 0;
  }
};

class ExpertPanelNature : public GaussianNature {
 public:
  ExpertPanelNature(std::uint64_t seed, std::size_t experts)
      : GaussianNature(seed), experts_(experts) {}

  std::optional<std::vector<double>> reveal(std::uint64_t) override {
    draw();
    const double margin = 3.0 * z_ - 0.5;
    q_ = logistic(margin);
    std::vector<double> forecasts(experts_);
    for (std::size_t k = 0; k < experts_; ++k) {
      const double shift = 0.25 * static_cast<double>(k / 4);
      switch (k % 4) {
        case 0: forecasts[k] = logistic(margin + shift); break;
        case 1: forecasts[k] = std::clamp(0.5 + shift, 0.0, 1.0); break;
        case 2: forecasts[k] = logistic(2.0 * margin + shift); break;
        default: forecasts[k] = logistic(margin + 1.0 + shift); break;
      }
    }
    return forecasts;
  }
  int outcome(const OutcomeContext&) override { return bernoulli(q_); }

 private:
  std::size_t experts_;
  double q_ = 0.5;
};

void expect_params(const NatureSpec& spec, std::size_t count) {
  if (spec.params.size() != count) {
    throw ConfigError("generator " + to_string(spec) + " expects " + std::to_string(count) +
                      " parameters");
  }
}

void check_params(const NatureSpec& spec) {
  const auto& p = spec.params;
  switch (spec.kind) {
    case NatureKind::kIidBernoulli:
      expect_params(spec, 1);
      if (!(p[0] >= 0.0 && p[0] <= 1.0)) throw ConfigError("Bernoulli rate outside [0,1]");
      break;
    case NatureKind::kMiscalibratedLink: expect_params(spec, 2); break;
    case NatureKind::kSignFlip: expect_params(spec, 0); break;
    case NatureKind::kDrifting:
      expect_params(spec, 3);
      if (!(p[2] > 0.0)) throw ConfigError("drift period must be positive");
      break;
    case NatureKind::kExpertPanel:
      expect_params(spec, 1);
      if (!(p[0] >= 1.0) || p[0] != std::floor(p[0])) {
        throw ConfigError("expert count must be a positive integer");
      }
      break;
  }
  for (double v : p) {
    if (!std::isfinite(v)) throw ConfigError("generator parameters must be finite");
  }
}

}  // namespace

NatureSpec parse_nature_spec(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  NatureSpec spec;
  bool found = false;
  for (const auto& kn : kKindNames) {
    if (name == kn.name) {
      spec.kind = kn.kind;
      found = true;
    }
  }
  if (!found) throw ConfigError("unknown generator '" + std::string(name) + "'");
  if (colon != std::string_view::npos) {
    std::istringstream in{std::string(text.substr(colon + 1))};
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        std::size_t used = 0;
        spec.params.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("bad generator parameter '" + item + "'");
      }
    }
  }
  spec = with_defaults(std::move(spec));
  check_params(spec);
  return spec;
}

std::string to_string(const NatureSpec& spec) {
  std::string out;
  for (const auto& kn : kKindNames) {
    if (kn.kind == spec.kind) out = kn.name;
  }
  for (std::size_t i = 0; i < spec.params.size(); ++i) {
    char buf[32];
    auto end = std::to_chars(buf, buf + sizeof buf, spec.params[i]).ptr;
    out += (i == 0 ? ":" : ",") + std::string(buf, end);
  }
  return out;
}

NatureSpec with_defaults(NatureSpec spec) {
  if (!spec.params.empty()) return spec;
  switch (spec.kind) {
    case NatureKind::kIidBernoulli: spec.params = {0.5}; break;
    case NatureKind::kMiscalibratedLink: spec.params = {3.0, -0.5}; break;
    case NatureKind::kSignFlip: break;
    case NatureKind::kDrifting: spec.params = {3.0, 1.5, 20000.0}; break;
    case NatureKind::kExpertPanel: spec.params = {4.0}; break;
  }
  return spec;
}

bool reveals_experts(NatureKind kind) { return kind == NatureKind::kExpertPanel; }

std::unique_ptr<RoundSource> make_nature(const NatureSpec& raw, std::uint64_t seed) {
  const NatureSpec spec = with_defaults(raw);
  check_params(spec);
  const auto& p = spec.params;
  switch (spec.kind) {
    case NatureKind::kIidBernoulli: return std::make_unique<IidNature>(seed, p[0]);
    case NatureKind::kMiscalibratedLink: return std::make_unique<LinkNature>(seed, p[0], p[1]);
    case NatureKind::kSignFlip: return std::make_unique<SignFlipNature>(seed);
    case NatureKind::kDrifting: return std::make_unique<DriftingNature>(seed, p[0], p[1], p[2]);
    case NatureKind::kExpertPanel:
      return std::make_unique<ExpertPanelNature>(seed, static_cast<std::size_t>(p[0]));
  }
  throw ConfigError("unknown generator");
}

}  // namespace recal
