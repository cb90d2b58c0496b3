#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "knitply/render.hpp"

namespace knitply {

enum class FitParam { AlbedoR, AlbedoG, AlbedoB, SpecWeight, TransWeight, LongWidth, AzimWidth, TransWidth };

/// Names match the material file keys (albedo_r, spec_weight, ...).
std::string_view param_name(FitParam p);
std::optional<FitParam> parse_param(std::string_view name);
double get_param(const BsdfParams& b, FitParam p);
void set_param(BsdfParams& b, FitParam p, double value);

struct FreeParam {
  FitParam param = FitParam::AlbedoR;
  double lo = 0, hi = 1;
};

struct FitProblem {
  std::vector<Scene> scenes;    // e.g. front- and back-lit variants of one sample
  std::vector<Image> references;  // one per scene, at render or at loss resolution
  BsdfParams initial;
  std::vector<FreeParam> free;
  RenderConfig render;          // spp and seed used for every evaluation
  double resolution = 0.1;      // linear scale of the loss images
  int budget = 400;             // maximum loss evaluations

  void validate() const;
  int downscale_factor() const;
};

/// Mean over scenes of the per-pixel squared RGB difference at the loss
/// resolution. Deterministic: every evaluation renders with render.seed.
double loss(const BsdfParams& params, const FitProblem& problem);

struct FitResult {
  BsdfParams best;
  double best_loss = 0;
  std::vector<double> trace;  // best loss after each evaluation
  int evaluations = 0;
  bool budget_exhausted = false;  // stopped by the budget rather than convergence
};

/// Nelder-Mead over the free parameters in logistic coordinates. When both
/// weights are free, trans_weight's upper bound shrinks to 1 - spec_weight.
FitResult fit(const FitProblem& problem);

/// Maps unconstrained coordinates to parameters (exposed for testing).
BsdfParams from_unconstrained(const FitProblem& problem, const std::vector<double>& z);
std::vector<double> to_unconstrained(const FitProblem& problem, const BsdfParams& params);

}  // namespace knitply
