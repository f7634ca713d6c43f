#include "trajcl/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "trajcl/contrastive.hpp"
#include "trajcl/nn/grad_check.hpp"
#include "trajcl/policy.hpp"

namespace trajcl::verify {
namespace {

using contrastive::QueryKeyBatch;
using encoder::PosteriorGaussian;

constexpr double kStep = 1e-5;
constexpr double kGradTol = 1e-4;
constexpr double kGradFloor = 1e-6;
constexpr std::size_t kProbes = 24;

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << what << "; ";
    }
  }
};

PosteriorGaussian random_posterior(std::size_t d, Rng& rng) {
  PosteriorGaussian p;
  for (std::size_t j = 0; j < d; ++j) {
    p.mean.push_back(uniform(rng, -1.0, 1.0));
    p.std.push_back(uniform(rng, 0.2, 1.5));
  }
  return p;
}

std::vector<env::Trajectory> random_trajectories(std::size_t count, int horizon, Rng& rng) {
  const auto split = env::sample_task_split(env::TaskFamily::point_goal_2d,
                                            static_cast<int>(count), 1, 7, horizon);
  std::vector<env::Trajectory> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& task = split.train_tasks[i];
    auto act = [&](std::span<const double>) {
      return std::vector<double>{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    };
    out.push_back(env::rollout(task, env::env_reset(task, rng), act, static_cast<int>(i),
                               static_cast<std::int64_t>(i)));
  }
  return out;
}

void check_report(Outcome& o, const std::string& what, const nn::GradCheckReport& r) {
  std::ostringstream s;
  s << what << " max rel err " << r.max_relative_error;
  o.expect(r.max_relative_error < kGradTol, s.str());
  if (o.passed) o.detail << s.str() << "; ";
}

Outcome check_ln_n() {
  Outcome o;
  Rng rng(11);
  for (const std::size_t n : {1u, 2u, 3u, 16u}) {
    const auto p = random_posterior(4, rng);
    QueryKeyBatch b{std::vector<PosteriorGaussian>(n, p), std::vector<PosteriorGaussian>(n, p)};
    const double loss = contrastive::tcl_loss(b, 1.0).loss;
    const double want = std::log(static_cast<double>(n));
    o.expect(n == 1 ? loss == 0.0 : std::abs(loss - want) <= 1e-9,
             "N=" + std::to_string(n) + " loss " + std::to_string(loss));
  }
  return o;
}

Outcome check_structured() {
  Outcome o;
  for (const std::size_t n : {3u, 16u}) {
    for (const double dist : {0.5, 2.0}) {
      // Scaled one-hot means: every off-diagonal pair sits at squared distance dist.
      const double s = std::sqrt(dist / 2.0);
      QueryKeyBatch b;
      for (std::size_t i = 0; i < n; ++i) {
        PosteriorGaussian p{std::vector<double>(n, 0.0), std::vector<double>(n, 0.5)};
        p.mean[i] = s;
        b.queries.push_back(p);
        b.keys.push_back(p);
      }
      const double loss = contrastive::tcl_loss(b, 1.0).loss;
      const double want = std::log1p(static_cast<double>(n - 1) * std::exp(-dist));
      o.expect(std::abs(loss - want) <= 1e-9, "N=" + std::to_string(n) + " D=" +
                                                  std::to_string(dist) + " mismatch");
    }
  }
  return o;
}

Outcome check_similarity(const SimilarityFn& sim) {
  Outcome o;
  const PosteriorGaussian q{{1.0, 2.0}, {1.0, 1.0}};
  const PosteriorGaussian k{{0.0, 0.0}, {2.0, 1.0}};
  o.expect(sim(q, k) == -6.0, "similarity of the reference pair is not -6");
  o.expect(sim(q, k) == sim(k, q), "similarity is not symmetric");
  o.expect(sim(q, q) == 0.0, "self-similarity is not 0");

  Rng rng(12);
  QueryKeyBatch b;
  for (int i = 0; i < 5; ++i) {
    b.queries.push_back(random_posterior(3, rng));
    b.keys.push_back(random_posterior(3, rng));
  }
  const auto report = contrastive::tcl_loss(b, 1.0, contrastive::LogitShift::none);
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (std::abs(report.logits(i, j) - sim(b.queries[i], b.keys[j])) > 1e-12) {
        o.expect(false, "loss logits disagree with the similarity");
        return o;
      }
    }
  }
  return o;
}

Outcome check_shift() {
  Outcome o;
  Rng rng(13);
  QueryKeyBatch b;
  for (int i = 0; i < 16; ++i) {
    b.queries.push_back(random_posterior(5, rng));
    b.keys.push_back(random_posterior(5, rng));
  }
  for (const double t : {0.5, 1.0, 2.0}) {
    const double a = contrastive::tcl_loss(b, t, contrastive::LogitShift::row_max).loss;
    const double c = contrastive::tcl_loss(b, t, contrastive::LogitShift::none).loss;
    o.expect(std::abs(a - c) <= 1e-12, "shifted and unshifted losses differ");
  }
  return o;
}

Outcome check_product() {
  Outcome o;
  Rng rng(14);
  double worst = 0.0;
  for (int set = 0; set < 20; ++set) {
    const std::size_t n = 2 + uniform_index(rng, 4);
    std::vector<encoder::GaussianFactor> f;
    for (std::size_t i = 0; i < n; ++i) {
      f.push_back({{uniform(rng, -2.0, 2.0)}, {uniform(rng, 0.3, 2.0)}});
    }
    const auto post = encoder::product_of_gaussians(f);
    // Trapezoid rule on the unnormalized product density.
    const double lo = post.mean[0] - 12.0 * post.std[0];
    const double h = 24.0 * post.std[0] / 20000.0;
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (int k = 0; k <= 20000; ++k) {
      const double x = lo + h * k;
      double logp = 0.0;
      for (const auto& g : f) logp -= 0.5 * std::pow((x - g.mean[0]) / g.std[0], 2);
      const double w = (k == 0 || k == 20000 ? 0.5 : 1.0) * std::exp(logp);
      z += w;
      m1 += w * x;
      m2 += w * x * x;
    }
    const double mean = m1 / z;
    const double var = m2 / z - mean * mean;
    worst = std::max({worst, std::abs(mean - post.mean[0]),
                      std::abs(var - post.std[0] * post.std[0])});
  }
  o.expect(worst <= 1e-6, "grid integration differs by " + std::to_string(worst));
  return o;
}

Outcome check_ema() {
  Outcome o;
  Rng rng(15);
  for (const double m : {0.9, 0.995}) {
    auto pair = encoder::EncoderPair::create(11, 3, {8}, rng);
    for (auto& v : pair.key_params.values()) v += uniform(rng, -0.5, 0.5);
    auto gap = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < pair.key_params.size(); ++i) {
        const double d = pair.key_params.values()[i] - pair.query_params.values()[i];
        s += d * d;
      }
      return std::sqrt(s);
    };
    const double g0 = gap();
    for (int k = 1; k <= 60; ++k) {
      encoder::ema_update(pair, m);
      if (std::abs(gap() - std::pow(m, k) * g0) > 1e-9) {
        o.expect(false, "m=" + std::to_string(m) + " deviates at k=" + std::to_string(k));
        break;
      }
    }
  }
  return o;
}

Outcome check_tcl_gradient() {
  Outcome o;
  Rng rng(16);
  const std::size_t d = 3, w = 5, n = 4;
  auto pair = encoder::EncoderPair::create(11, d, {8, 8}, rng);
  for (auto& v : pair.key_params.values()) v += uniform(rng, -0.1, 0.1);
  const auto trajs = random_trajectories(n, 12, rng);
  std::vector<std::vector<env::Transition>> qwin, kwin;
  for (const auto& t : trajs) {
    qwin.push_back(replay::crop_window(t, uniform_index(rng, 8), w).transitions);
    kwin.push_back(replay::crop_window(t, uniform_index(rng, 8), w).transitions);
  }
  std::vector<PosteriorGaussian> keys;
  for (const auto& k : kwin) keys.push_back(encoder::infer_posterior(pair, k, true));

  auto loss_at = [&](std::span<const double> params) {
    nn::ParamVector p(pair.query_params.layout(), {params.begin(), params.end()});
    QueryKeyBatch b{{}, keys};
    for (const auto& q : qwin) {
      b.queries.push_back(encoder::product_of_gaussians(encoder::encode_factors(pair.spec, p, d, q)));
    }
    return contrastive::tcl_loss(b, 0.7).loss;
  };

  std::vector<encoder::WindowEncoding> enc;
  QueryKeyBatch b{{}, keys};
  for (const auto& q : qwin) {
    enc.emplace_back(pair.spec, pair.query_params, d, q);
    b.queries.push_back(enc.back().posterior());
  }
  const auto g = contrastive::tcl_loss_backward(b, 0.7);
  std::vector<double> grad(pair.query_params.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    enc[i].backward(pair.spec, pair.query_params, g.query_mean[i], g.query_std[i], grad);
  }
  check_report(o, "encoder",
               nn::grad_check(loss_at, pair.query_params.values(), grad, kProbes, kStep, 1,
                              kGradFloor));
  return o;
}

struct RlFixture {
  encoder::EncoderPair pair;
  policy::ActorParams actor;
  policy::CriticParams critics;
  std::vector<env::Transition> window;
  policy::RlBatch batch;
  std::vector<double> noise;
};

RlFixture make_rl_fixture() {
  Rng rng(17);
  RlFixture f;
  f.pair = encoder::EncoderPair::create(11, 3, {8}, rng);
  f.actor = policy::ActorParams::create(4, 2, 3, {8, 8}, rng);
  f.critics = policy::CriticParams::create(4, 2, 3, {8, 8}, rng);
  for (auto* p : {&f.critics.q1_target, &f.critics.q2_target}) {
    for (auto& v : p->values()) v += uniform(rng, -0.05, 0.05);
  }
  const auto trajs = random_trajectories(1, 10, rng);
  f.window = replay::crop_window(trajs[0], 2, 6).transitions;
  f.batch.transitions.assign(trajs[0].transitions.begin(), trajs[0].transitions.begin() + 5);
  for (int j = 0; j < 3; ++j) f.noise.push_back(standard_normal(rng));
  return f;
}

std::vector<double> z_from(const PosteriorGaussian& p, const std::vector<double>& noise) {
  std::vector<double> z(p.dim());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = p.mean[j] + p.std[j] * noise[j];
  return z;
}

Outcome check_critic_gradient() {
  Outcome o;
  auto f = make_rl_fixture();
  const policy::SacConfig sac{0.9, 0.2, 10.0, 0.005};
  const double kl_weight = 0.1;

  encoder::WindowEncoding enc(f.pair.spec, f.pair.query_params, 3, f.window);
  f.batch.z = z_from(enc.posterior(), f.noise);
  Rng rng(3);
  const auto base = policy::critic_loss(f.critics, f.actor, f.batch, sac, rng);

  // Targets are constants of the differentiation.
  auto residual_loss = [&](const nn::ParamVector& q1, const nn::ParamVector& q2,
                           const std::vector<double>& z) {
    double l = 0.0;
    for (std::size_t b = 0; b < f.batch.transitions.size(); ++b) {
      const auto& t = f.batch.transitions[b];
      const double y = base.targets[b];
      l += std::pow(policy::q_value(f.critics.spec, q1, t.state, t.action, z) - y, 2) +
           std::pow(policy::q_value(f.critics.spec, q2, t.state, t.action, z) - y, 2);
    }
    return l / static_cast<double>(f.batch.transitions.size());
  };

  auto q1_loss = [&](std::span<const double> v) {
    nn::ParamVector p(f.critics.q1.layout(), {v.begin(), v.end()});
    return residual_loss(p, f.critics.q2, f.batch.z);
  };
  check_report(o, "q1",
               nn::grad_check(q1_loss, f.critics.q1.values(), base.grad_q1, kProbes, kStep, 2,
                              kGradFloor));

  auto enc_loss = [&](std::span<const double> v) {
    nn::ParamVector p(f.pair.query_params.layout(), {v.begin(), v.end()});
    const auto post =
        encoder::product_of_gaussians(encoder::encode_factors(f.pair.spec, p, 3, f.window));
    return residual_loss(f.critics.q1, f.critics.q2, z_from(post, f.noise)) +
           kl_weight * encoder::kl_to_unit_prior(post);
  };
  std::vector<double> dm(3, 0.0), ds(3, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    dm[j] = base.grad_z[j];
    ds[j] = base.grad_z[j] * f.noise[j];
  }
  encoder::kl_to_unit_prior_backward(enc.posterior(), kl_weight, dm, ds);
  std::vector<double> g(f.pair.query_params.size(), 0.0);
  enc.backward(f.pair.spec, f.pair.query_params, dm, ds, g);
  check_report(o, "encoder via z",
               nn::grad_check(enc_loss, f.pair.query_params.values(), g, kProbes, kStep, 3,
                              kGradFloor));
  return o;
}

Outcome check_actor_gradient() {
  Outcome o;
  auto f = make_rl_fixture();
  f.batch.z = {0.3, -0.2, 0.5};
  auto loss_at = [&](std::span<const double> v) {
    policy::ActorParams a = f.actor;
    std::copy(v.begin(), v.end(), a.params.values().begin());
    Rng rng(4);
    return policy::actor_loss(a, f.critics, f.batch, 0.2, rng).loss;
  };
  Rng rng(4);
  const auto base = policy::actor_loss(f.actor, f.critics, f.batch, 0.2, rng);
  check_report(o, "actor",
               nn::grad_check(loss_at, f.actor.params.values(), base.grad_actor, kProbes, kStep,
                              5, kGradFloor));
  return o;
}

}  // namespace

std::vector<CheckResult> run_suite(const Hooks& hooks) {
  const SimilarityFn sim = hooks.similarity ? hooks.similarity : SimilarityFn(contrastive::similarity);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"tcl_loss identical posteriors = ln N", check_ln_n},
      {"tcl_loss uniform negatives closed form", check_structured},
      {"similarity closed form and logits", [&] { return check_similarity(sim); }},
      {"row-max shift invariance", check_shift},
      {"product of Gaussians vs grid integral", check_product},
      {"EMA gap decays as m^k", check_ema},
      {"gradient: window -> tcl_loss", check_tcl_gradient},
      {"gradient: critic loss incl. encoder", check_critic_gradient},
      {"gradient: actor loss", check_actor_gradient},
  };
  std::vector<CheckResult> results;
  for (const auto& [name, fn] : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r{name, false, "", 0.0};
    try {
      auto out = fn();
      r.passed = out.passed;
      r.detail = out.detail.str();
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(r));
  }
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

void print_table(const std::vector<CheckResult>& results, std::ostream& out) {
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-4s %-42s %8.3fs  ", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.seconds);
    out << line << r.detail << '\n';
  }
}

}  // namespace trajcl::verify
