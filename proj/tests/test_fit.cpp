#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "knitply/errors.hpp"
#include "knitply/fit.hpp"

using namespace knitply;
using namespace knitply::test;

namespace {

const Swatch& small_swatch() {
  static const Swatch s = make_swatch(2);
  return s;
}

BsdfParams truth() {
  BsdfParams b;
  b.albedo = {0.7, 0.6, 0.5};
  b.spec_weight = 0.25;
  b.trans_weight = 0.15;
  b.long_width = 0.25;
  return b;
}

// Front- and back-lit views with self-rendered references.
FitProblem self_problem(const BsdfParams& reference, int resolution, int spp) {
  const Swatch& sw = small_swatch();
  Material m;
  m.bsdf = reference;
  FitProblem p;
  p.scenes.push_back(swatch_scene(sw, m, {swatch_light(sw)}, Environment::none(), resolution));
  p.scenes.push_back(swatch_scene(sw, m, {swatch_backlight(sw)}, Environment::none(), resolution));
  p.render.spp = spp;
  p.render.seed = 42;
  for (const Scene& s : p.scenes) p.references.push_back(render(s, p.render));
  p.initial = reference;
  return p;
}

}  // namespace

TEST(FitParams, NamesRoundTrip) {
  for (auto p : {FitParam::AlbedoR, FitParam::AlbedoG, FitParam::AlbedoB, FitParam::SpecWeight, FitParam::TransWeight,
                 FitParam::LongWidth, FitParam::AzimWidth, FitParam::TransWidth}) {
    EXPECT_EQ(parse_param(param_name(p)), p);
    BsdfParams b;
    set_param(b, p, 0.123);
    EXPECT_EQ(get_param(b, p), 0.123);
  }
  EXPECT_FALSE(parse_param("albedo").has_value());
}

TEST(FitParams, ReparameterizationKeepsWeightsFeasible) {
  FitProblem p;
  p.free = {{FitParam::TransWeight, 0, 0.9}, {FitParam::SpecWeight, 0, 0.9}, {FitParam::LongWidth, 0.05, 1}};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 4);
  for (int k = 0; k < 1000; ++k) {
    const BsdfParams b = from_unconstrained(p, {g(rng), g(rng), g(rng)});
    EXPECT_GE(b.body_weight(), -1e-12);
    EXPECT_GE(b.spec_weight, 0);
    EXPECT_LE(b.spec_weight, 0.9);
    EXPECT_GE(b.long_width, 0.05);
    EXPECT_LE(b.long_width, 1);
    const BsdfParams back = from_unconstrained(p, to_unconstrained(p, b));
    EXPECT_NEAR(back.spec_weight, b.spec_weight, 1e-7);
    EXPECT_NEAR(back.trans_weight, b.trans_weight, 1e-7);
    EXPECT_NEAR(back.long_width, b.long_width, 1e-7);
  }
}

TEST(FitProblem, Validation) {
  FitProblem p = self_problem(truth(), 8, 1);
  EXPECT_NO_THROW(p.validate());
  FitProblem q = p;
  q.references.pop_back();
  EXPECT_THROW(q.validate(), InvariantError);
  q = p;
  q.references[0] = Image(5, 5);
  EXPECT_THROW(q.validate(), InvariantError);
  q = p;
  q.free = {{FitParam::AlbedoR, 1, 0}};
  EXPECT_THROW(q.validate(), InvariantError);
  q.free = {{FitParam::SpecWeight, 0, 0.8}, {FitParam::TransWeight, 0.3, 0.5}};
  EXPECT_THROW(q.validate(), InvariantError);
  q.free = {{FitParam::AlbedoR, 0, 1}, {FitParam::AlbedoR, 0, 1}};
  EXPECT_THROW(q.validate(), InvariantError);
  q.free = {{FitParam::AlbedoR, 0, 1}};
  q.budget = 2;
  EXPECT_THROW(q.validate(), InvariantError);
  q = p;
  q.references[0] = Image(1, 1);  // loss resolution of an 8x8 render
  EXPECT_NO_THROW(q.validate());
}

TEST(Loss, SelfRenderIsZero) {
  const FitProblem p = self_problem(truth(), 16, 2);
  EXPECT_EQ(loss(truth(), p), 0.0);
}

TEST(Loss, BlackAgainstWhiteIsOne) {
  const Swatch& sw = small_swatch();
  AreaLight away = swatch_light(sw);
  std::swap(away.edge_u, away.edge_v);  // faces up, lighting nothing below it
  FitProblem p;
  p.scenes.push_back(swatch_scene(sw, {}, {away}, Environment::none(), 20));
  Image white(20, 20);
  std::fill(white.data.begin(), white.data.end(), 1.0f);
  p.references.push_back(white);
  p.render.spp = 1;
  EXPECT_DOUBLE_EQ(loss(p.initial, p), 1.0);
}

TEST(Loss, AlbedoPerturbationIncreasesLoss) {
  const FitProblem p = self_problem(truth(), 32, 4);
  BsdfParams b = truth();
  b.albedo.x += 0.1;
  EXPECT_GT(loss(b, p), 0.0);
  BsdfParams c = truth();
  c.albedo.x += 0.05;
  EXPECT_LT(loss(c, p), loss(b, p));
}

TEST(Fit, ZeroFreeParametersEvaluatesOnce) {
  FitProblem p = self_problem(truth(), 8, 1);
  p.initial.spec_weight = 0.1;
  const FitResult r = fit(p);
  EXPECT_EQ(r.evaluations, 1);
  EXPECT_EQ(r.best.spec_weight, 0.1);
  EXPECT_GT(r.best_loss, 0);
  ASSERT_EQ(r.trace.size(), 1u);
}

TEST(Fit, RecoversAlbedoWithinTwoPercent) {
  FitProblem p = self_problem(truth(), 32, 8);
  p.initial.albedo.x = 0.4;
  p.free = {{FitParam::AlbedoR, 0.05, 0.99}};
  p.budget = 60;
  const FitResult r = fit(p);
  EXPECT_LE(r.evaluations, 60);
  EXPECT_NEAR(r.best.albedo.x, truth().albedo.x, 0.02 * truth().albedo.x);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
  EXPECT_EQ(r.trace.back(), r.best_loss);
}

TEST(Fit, DeterministicAndBudgeted) {
  FitProblem p = self_problem(truth(), 12, 2);
  p.initial.spec_weight = 0.05;
  p.initial.long_width = 0.5;
  p.free = {{FitParam::SpecWeight, 0, 0.6}, {FitParam::LongWidth, 0.05, 1.0}};
  p.budget = 12;
  const FitResult a = fit(p);
  const FitResult b = fit(p);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_LE(a.evaluations, 12);
  EXPECT_TRUE(a.budget_exhausted);
  EXPECT_LT(a.best_loss, a.trace.front());
}
