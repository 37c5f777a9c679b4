#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recal/calibrator.hpp"

namespace recal {

// What the forecasting side reveals before Nature picks y_t.
struct OutcomeContext {
  double expected_forecast = 0.5;  // mean of the routed subroutine's distribution
  double emitted = 0.5;            // the sampled forecast actually output
};

// Supplies protocol rounds: first the side information (covariates, a raw
// forecast, or expert forecasts), then the outcome for that round.
class RoundSource {
 public:
  virtual ~RoundSource() = default;

  // nullopt when the source is exhausted.
  virtual std::optional<std::vector<double>> reveal(std::uint64_t t) = 0;
  virtual int outcome(const OutcomeContext& context) = 0;
};

enum class NatureKind { kIidBernoulli, kMiscalibratedLink, kSignFlip, kDrifting, kExpertPanel };

// A generator and its parameters, written on the command line as
// "kind[:a,b,...]", e.g. "iid-bernoulli:0.3" or "expert-panel:4".
struct NatureSpec {
  NatureKind kind = NatureKind::kMiscalibratedLink;
  std::vector<double> params;

  bool operator==(const NatureSpec&) const = default;
};

NatureSpec parse_nature_spec(std::string_view text);
std::string to_string(const NatureSpec& spec);

// Fills in default parameters:
//   iid-bernoulli        q = 0.5
//   miscalibrated-link   a = 3, b = -0.5
//   sign-flip-adversary  (none)
//   drifting             a = 3, amplitude = 1.5, period = 20000
//   expert-panel         K = 4
NatureSpec with_defaults(NatureSpec spec);

// True for generators revealing K expert forecasts rather than covariates.
bool reveals_experts(NatureKind kind);

// Covariate generators reveal x = (z, 1) with z standard normal.
//
// miscalibrated-link: y ~ Bernoulli(sigma(a z + b)).
// sign-flip-adversary: y = 1 iff the expected emitted forecast is <= 0.5.
//   It sees the distribution, never the sampled forecast.
// drifting: y ~ Bernoulli(sigma(a z + amplitude * sin(2 pi t / period))).
// expert-panel: latent q = sigma(3 z - 0.5), y ~ Bernoulli(q); expert 0
//   reports q exactly, expert 1 says 0.5, expert 2 is overconfident
//   sigma(2 (3 z - 0.5)), expert 3 is biased sigma(3 z + 0.5); further
//   experts repeat the pattern with a growing shift.
std::unique_ptr<RoundSource> make_nature(const NatureSpec& spec, std::uint64_t seed);

}  // namespace recal
