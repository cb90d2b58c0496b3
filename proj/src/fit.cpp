#include "knitply/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knitply/errors.hpp"

namespace knitply {

namespace {

constexpr std::pair<FitParam, std::string_view> kNames[] = {
    {FitParam::AlbedoR, "albedo_r"},       {FitParam::AlbedoG, "albedo_g"},       {FitParam::AlbedoB, "albedo_b"},
    {FitParam::SpecWeight, "spec_weight"}, {FitParam::TransWeight, "trans_weight"}, {FitParam::LongWidth, "long_width"},
    {FitParam::AzimWidth, "azim_width"},   {FitParam::TransWidth, "trans_width"},
};

double sigmoid(double z) { return 1 / (1 + std::exp(-z)); }

double logit(double f) {
  f = std::clamp(f, 1e-9, 1 - 1e-9);
  return std::log(f / (1 - f));
}

// Upper bound of a free parameter given the already-mapped values.
double upper(const FreeParam& fp, const BsdfParams& b) {
  if (fp.param == FitParam::TransWeight) return std::max(fp.lo, std::min(fp.hi, 1 - b.spec_weight));
  return fp.hi;
}

// Order in which free parameters are mapped: trans_weight after spec_weight.
std::vector<std::size_t> mapping_order(const FitProblem& p) {
  std::vector<std::size_t> order(p.free.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_partition(order.begin(), order.end(),
                        [&](std::size_t i) { return p.free[i].param != FitParam::TransWeight; });
  return order;
}

struct Vertex {
  std::vector<double> z;
  double f = 0;
};

}  // namespace

std::string_view param_name(FitParam p) {
  for (const auto& [k, n] : kNames) {
    if (k == p) return n;
  }
  return "?";
}

std::optional<FitParam> parse_param(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

double get_param(const BsdfParams& b, FitParam p) {
  switch (p) {
    case FitParam::AlbedoR: return b.albedo.x;
    case FitParam::AlbedoG: return b.albedo.y;
    case FitParam::AlbedoB: return b.albedo.z;
    case FitParam::SpecWeight: return b.spec_weight;
    case FitParam::TransWeight: return b.trans_weight;
    case FitParam::LongWidth: return b.long_width;
    case FitParam::AzimWidth: return b.azim_width;
    case FitParam::TransWidth: return b.trans_width;
  }
  return 0;
}

void set_param(BsdfParams& b, FitParam p, double value) {
  switch (p) {
    case FitParam::AlbedoR: b.albedo.x = value; break;
    case FitParam::AlbedoG: b.albedo.y = value; break;
    case FitParam::AlbedoB: b.albedo.z = value; break;
    case FitParam::SpecWeight: b.spec_weight = value; break;
    case FitParam::TransWeight: b.trans_weight = value; break;
    case FitParam::LongWidth: b.long_width = value; break;
    case FitParam::AzimWidth: b.azim_width = value; break;
    case FitParam::TransWidth: b.trans_width = value; break;
  }
}

int FitProblem::downscale_factor() const { return std::max(1, static_cast<int>(std::lround(1 / resolution))); }

void FitProblem::validate() const {
  if (scenes.empty()) throw InvariantError("fit needs at least one scene");
  if (references.size() != scenes.size()) throw InvariantError("fit needs one reference image per scene");
  if (!(resolution > 0 && resolution <= 1)) throw InvariantError("fit resolution must lie in (0, 1]");
  render.validate();
  initial.validate();
  const int k = downscale_factor();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Camera& c = scenes[i].camera;
    const Image small(std::max(1, (c.width + k - 1) / k), std::max(1, (c.height + k - 1) / k));
    const Image& r = references[i];
    const bool full = r.width == c.width && r.height == c.height;
    const bool reduced = r.width == small.width && r.height == small.height;
    if (!full && !reduced) {
      throw InvariantError("reference " + std::to_string(i) + " is " + std::to_string(r.width) + "x" +
                           std::to_string(r.height) + ", expected the render or the loss resolution");
    }
  }
  bool kr = false, kt = false;
  double kr_hi = 0, kt_lo = 0;
  for (std::size_t i = 0; i < free.size(); ++i) {
    const FreeParam& f = free[i];
    if (!(std::isfinite(f.lo) && std::isfinite(f.hi) && f.lo < f.hi)) {
      throw InvariantError("bounds of " + std::string(param_name(f.param)) + " must be finite with lo < hi");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (free[j].param == f.param) throw InvariantError(std::string(param_name(f.param)) + " is listed twice");
    }
    if (f.param == FitParam::SpecWeight) kr = true, kr_hi = f.hi;
    if (f.param == FitParam::TransWeight) kt = true, kt_lo = f.lo;
    if (f.lo < 0) throw InvariantError("lower bound of " + std::string(param_name(f.param)) + " is negative");
  }
  if (kr && kt && kr_hi + kt_lo > 1) throw InvariantError("spec_weight upper + trans_weight lower bound exceed 1");
  if (budget < static_cast<int>(free.size()) + 2) throw InvariantError("fit budget must be at least dimension + 2");
}

BsdfParams from_unconstrained(const FitProblem& problem, const std::vector<double>& z) {
  BsdfParams b = problem.initial;
  for (std::size_t i : mapping_order(problem)) {
    const FreeParam& fp = problem.free[i];
    set_param(b, fp.param, fp.lo + (upper(fp, b) - fp.lo) * sigmoid(z[i]));
  }
  if (b.body_weight() < 0) b.trans_weight = std::max(0.0, 1 - b.spec_weight);
  return b;
}

std::vector<double> to_unconstrained(const FitProblem& problem, const BsdfParams& params) {
  std::vector<double> z(problem.free.size());
  BsdfParams b = problem.initial;
  for (std::size_t i : mapping_order(problem)) {
    const FreeParam& fp = problem.free[i];
    const double hi = upper(fp, b);
    const double v = get_param(params, fp.param);
    z[i] = hi > fp.lo ? logit((v - fp.lo) / (hi - fp.lo)) : 0.0;
    set_param(b, fp.param, fp.lo + (hi - fp.lo) * sigmoid(z[i]));
  }
  return z;
}

double loss(const BsdfParams& params, const FitProblem& problem) {
  const int k = problem.downscale_factor();
  double sum = 0;
  for (std::size_t i = 0; i < problem.scenes.size(); ++i) {
    Scene scene = problem.scenes[i];
    scene.material.bsdf = params;
    const Image img = downscale(render(scene, problem.render), k);
    const Image& ref = problem.references[i];
    sum += mean_squared_error(img, ref.width == img.width && ref.height == img.height ? ref : downscale(ref, k));
  }
  return sum / double(problem.scenes.size());
}

FitResult fit(const FitProblem& problem) {
  problem.validate();
  FitResult res;
  const std::size_t n = problem.free.size();
  auto evaluate = [&](const std::vector<double>& z) {
    const BsdfParams b = from_unconstrained(problem, z);
    const double f = loss(b, problem);
    ++res.evaluations;
    if (res.trace.empty() || f < res.best_loss) {
      res.best_loss = f;
      res.best = b;
    }
    res.trace.push_back(res.best_loss);
    return f;
  };

  if (n == 0) {
    res.best = problem.initial;
    res.best_loss = loss(problem.initial, problem);
    res.evaluations = 1;
    res.trace = {res.best_loss};
    return res;
  }

  const std::vector<double> z0 = to_unconstrained(problem, problem.initial);
  std::vector<Vertex> simplex(n + 1);
  simplex[0] = {z0, evaluate(z0)};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z = z0;
    z[i] += z[i] > 2 ? -1.0 : 1.0;
    simplex[i + 1] = {z, evaluate(z)};
  }

  const auto budget_left = [&](int need) { return res.evaluations + need <= problem.budget; };
  const auto blend = [](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
    return out;
  };

  for (;;) {
    std::sort(simplex.begin(), simplex.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    double size = 0;
    for (std::size_t v = 1; v <= n; ++v) {
      for (std::size_t i = 0; i < n; ++i) size = std::max(size, std::abs(simplex[v].z[i] - simplex[0].z[i]));
    }
    if (size < 1e-7 || simplex[n].f - simplex[0].f <= 1e-15 * std::max(1.0, std::abs(simplex[0].f))) break;
    if (!budget_left(1)) {
      res.budget_exhausted = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v].z[i] / double(n);
    }
    Vertex& worst = simplex[n];
    const std::vector<double> zr = blend(centroid, worst.z, -1.0);
    const double fr = evaluate(zr);
    if (fr < simplex[0].f) {
      if (budget_left(1)) {
        const std::vector<double> ze = blend(centroid, worst.z, -2.0);
        const double fe = evaluate(ze);
        worst = fe < fr ? Vertex{ze, fe} : Vertex{zr, fr};
      } else {
        worst = {zr, fr};
      }
      continue;
    }
    if (fr < simplex[n - 1].f) {
      worst = {zr, fr};
      continue;
    }
    if (!budget_left(1)) {
      res.budget_exhausted = true;
      break;
    }
    const bool outside = fr < worst.f;
    const std::vector<double> zc = blend(centroid, outside ? zr : worst.z, 0.5);
    const double fc = evaluate(zc);
    if (fc < (outside ? fr : worst.f)) {
      worst = {zc, fc};
      continue;
    }
    for (std::size_t v = 1; v <= n; ++v) {
      if (!budget_left(1)) {
        res.budget_exhausted = true;
        break;
      }
      simplex[v].z = blend(simplex[0].z, simplex[v].z, 0.5);
      simplex[v].f = evaluate(simplex[v].z);
    }
    if (res.budget_exhausted) break;
  }
  return res;
}

}  // namespace knitply
