#include "depman/inverter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <omp.h>

#include "depman/errors.hpp"

namespace depman {

namespace {

constexpr double kRadToPct = 100.0 / kPi;

int wrap_deg(int d) { return ((d % 360) + 360) % 360; }

double angle_pct(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0) return 50.0;  // no achieved direction: neither aligned nor opposed
  return kRadToPct * std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

// e^{j deg} for the whole degree grid.
const std::array<cplx, 360>& unit_phasors() {
  static const auto table = [] {
    std::array<cplx, 360> t;
    for (int d = 0; d < 360; ++d) t[d] = std::polar(1.0, d * kPi / 180.0);
    return t;
  }();
  return table;
}

// Quadratic forms flattened for the inner loop: upper triangle with the factor 2
// folded into off-diagonal entries.
class FormEvaluator {
 public:
  explicit FormEvaluator(const WrenchFormSet& forms) : n_(forms.n()) {
    for (int a = 0; a < 6; ++a) {
      const CMat& M = a < 3 ? forms.P[a] : forms.Q[a - 3];
      for (int p = 0; p < n_; ++p) {
        diag_.push_back(M(p, p).real());
        for (int q = p + 1; q < n_; ++q) off_.push_back(2.0 * M(p, q));
      }
    }
  }

  Wrench operator()(const PhasorVector& ph) const {
    thread_local std::vector<cplx> u;
    u.resize(n_);
    const auto& cis = unit_phasors();
    for (int i = 0; i < n_; ++i) u[i] = cis[ph.phase_deg[i]];
    const double u2 = ph.amplitude * ph.amplitude;
    double out[6];
    std::size_t di = 0, oi = 0;
    for (int a = 0; a < 6; ++a) {
      double s = 0;
      for (int p = 0; p < n_; ++p) {
        s += diag_[di++];
        cplx row{};
        for (int q = p + 1; q < n_; ++q) row += off_[oi++] * u[q];
        s += (std::conj(u[p]) * row).real();
      }
      out[a] = u2 * s;
    }
    return {Vec3(out[0], out[1], out[2]), Vec3(out[3], out[4], out[5])};
  }

 private:
  int n_;
  std::vector<double> diag_;
  std::vector<cplx> off_;
};

bool better(const InverseSolution& a, const InverseSolution& b) {
  if (a.error.cost != b.error.cost) return a.error.cost < b.error.cost;
  return a.phases.phase_deg < b.phases.phase_deg;
}

InverseSolution anneal_chain(const FormEvaluator& eval, const Wrench& ref, const AnnealSchedule& s,
                             const PhasorVector& warm, int budget, std::uint64_t seed,
                             const ErrorTolerances& tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = warm.n();
  const int first_free = n > 1 ? 1 : 0;  // electrode 0 is the gauge

  InverseSolution best;
  best.phases = warm;
  best.wrench = eval(warm);
  best.error = error_vector(best.wrench, ref, tol);
  best.evals = 1;

  PhasorVector cur = warm;
  double cur_cost = best.error.cost;

  auto propose = [&](const PhasorVector& from, double sigma_deg) {
    PhasorVector next = from;
    const int e = first_free + static_cast<int>(uniform(rng) * (n - first_free)) % (n - first_free);
    int steps = static_cast<int>(std::lround(sigma_deg * normal(rng) / s.phase_step_deg));
    if (steps == 0) steps = uniform(rng) < 0.5 ? -1 : 1;
    next.phase_deg[e] = wrap_deg(next.phase_deg[e] + steps * s.phase_step_deg);
    return next;
  };
  auto consider = [&](const PhasorVector& ph) {
    const Wrench w = eval(ph);
    const ErrorVector ev = error_vector(w, ref, tol);
    ++best.evals;
    if (ev.cost < best.error.cost) {
      best.phases = ph;
      best.wrench = w;
      best.error = ev;
    }
    return ev.cost;
  };

  double T = s.T0;
  if (T <= 0) {
    // Kirkpatrick-style start: mean uphill step over a few proposals from the warm
    // start, scaled so that step is accepted with the target probability.
    double uphill = 0;
    int count = 0;
    for (int i = 0; i < s.calibration_proposals && best.evals < budget; ++i) {
      const double c = consider(propose(warm, s.sigma_start_deg));
      if (c > cur_cost) {
        uphill += c - cur_cost;
        ++count;
      }
    }
    T = count > 0 ? -(uphill / count) / std::log(s.calibration_acceptance) : 1.0;
  }
  best.T0 = T;

  const int levels = std::max(1, (budget - best.evals + s.moves_per_temp - 1) / s.moves_per_temp);
  int level = 0, stage_start = 0, last_gain = 0;
  double best_cost = best.error.cost;
  while (best.evals < budget) {
    if (s.reheat_levels > 0 && level - last_gain >= s.reheat_levels) {
      cur = best.phases;
      cur_cost = best.error.cost;
      T = best.T0;
      stage_start = last_gain = level;
    }
    const double progress = std::min(1.0, static_cast<double>(level - stage_start) / levels);
    const double sigma = s.sigma_start_deg * std::pow(s.sigma_end_deg / s.sigma_start_deg, progress);
    for (int m = 0; m < s.moves_per_temp && best.evals < budget; ++m) {
      PhasorVector next = propose(cur, sigma);
      const double c = consider(next);
      if (c <= cur_cost || uniform(rng) < std::exp(-(c - cur_cost) / T)) {
        cur = std::move(next);
        cur_cost = c;
      }
    }
    T *= s.alpha;
    ++level;
    if (best.error.cost < best_cost) {
      best_cost = best.error.cost;
      last_gain = level;
    }
  }
  return best;
}

InverseSolution brute_force_range(const FormEvaluator& eval, const Wrench& ref, int n, int step,
                                  double amplitude, int gauge, long long begin, long long end,
                                  const ErrorTolerances& tol) {
  const int levels = 360 / step;
  InverseSolution best;
  best.error.cost = std::numeric_limits<double>::infinity();
  PhasorVector ph(std::vector<int>(n, 0), amplitude);
  for (long long idx = begin; idx < end; ++idx) {
    long long rest = idx;
    // last free electrode varies fastest, so index order is lexicographic order
    for (int e = n - 1; e >= 0; --e) {
      if (e == gauge) continue;
      ph.phase_deg[e] = static_cast<int>(rest % levels) * step;
      rest /= levels;
    }
    const Wrench w = eval(ph);
    const ErrorVector ev = error_vector(w, ref, tol);
    if (ev.cost < best.error.cost) {
      best.phases = ph;
      best.wrench = w;
      best.error = ev;
    }
  }
  best.evals = static_cast<int>(end - begin);
  return best;
}

long long grid_states(int n, int step) {
  if (step <= 0 || 360 % step != 0)
    throw ConfigError("phase step must divide 360, got " + std::to_string(step));
  long long count = 1;
  for (int i = 1; i < n; ++i) {
    count *= 360 / step;
    if (count > 10'000'000) throw ConfigError("brute-force grid exceeds 1e7 states");
  }
  return count;
}

void check_gauge(int n, int gauge) {
  if (gauge < 0 || gauge >= n) throw ConfigError("gauge electrode out of range");
}

}  // namespace

PhasorVector::PhasorVector(std::vector<int> phases, double u)
    : amplitude(u), phase_deg(std::move(phases)) {
  for (int& p : phase_deg) p = wrap_deg(p);
}

std::vector<cplx> PhasorVector::phasors() const {
  std::vector<cplx> u(phase_deg.size());
  const auto& cis = unit_phasors();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = amplitude * cis[wrap_deg(phase_deg[i])];
  return u;
}

PhasorVector PhasorVector::shifted(int deg) const {
  PhasorVector out = *this;
  for (int& p : out.phase_deg) p = wrap_deg(p + deg);
  return out;
}

ErrorVector error_vector(const Wrench& achieved, const Wrench& ref, const ErrorTolerances& tol) {
  ErrorVector e;
  const double tr = ref.T.norm(), ta = achieved.T.norm();
  if (tr < tol.torque_min) {
    e.e1 = 0;
    e.e2 = 100 * ta / tol.torque_scale;
  } else {
    e.e1 = angle_pct(achieved.T, ref.T);
    e.e2 = 100 * std::abs(ta - tr) / tr;
  }
  const Eigen::Vector2d fa = achieved.F.head<2>(), fr = ref.F.head<2>();
  if (fr.norm() < tol.force_min)
    e.e3 = std::min(100.0, 100 * fa.norm() / tol.force_scale);
  else
    e.e3 = angle_pct(fa, fr);
  if (std::abs(ref.F.z()) < tol.force_min)
    e.e4 = 100 * std::abs(achieved.F.z()) / tol.force_scale;
  else
    e.e4 = 100 * std::abs(achieved.F.z() - ref.F.z()) / std::abs(ref.F.z());
  const auto& w = ErrorVector::kWeights;
  const double wn = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]);
  e.cost = (w[0] * e.e1 + w[1] * e.e2 + w[2] * e.e3 + w[3] * e.e4) / wn;
  return e;
}

void AnnealSchedule::validate() const {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("anneal alpha must be in (0, 1)");
  if (max_evals < 1) throw ConfigError("anneal max_evals must be >= 1");
  if (moves_per_temp < 1) throw ConfigError("anneal moves_per_temp must be >= 1");
  if (phase_step_deg < 1 || 360 % phase_step_deg != 0) throw ConfigError("anneal phase step must divide 360");
  if (!(sigma_start_deg > 0) || !(sigma_end_deg > 0)) throw ConfigError("anneal sigmas must be > 0");
  if (!(calibration_acceptance > 0 && calibration_acceptance < 1))
    throw ConfigError("anneal calibration acceptance must be in (0, 1)");
  if (restarts < 1) throw ConfigError("anneal restarts must be >= 1");
  if (reheat_levels < 0) throw ConfigError("anneal reheat_levels must be >= 0");
}

InverseSolution sa_solve(const WrenchFormSet& forms, const Wrench& ref, const AnnealSchedule& sched,
                         const PhasorVector& warm_start, const ErrorTolerances& tol) {
  sched.validate();
  if (warm_start.n() != forms.n())
    throw std::invalid_argument("sa_solve: warm start has " + std::to_string(warm_start.n()) +
                                " phases for " + std::to_string(forms.n()) + " electrodes");
  const FormEvaluator eval(forms);
  const int chains = std::min(sched.restarts, sched.max_evals);
  if (chains == 1) return anneal_chain(eval, ref, sched, warm_start, sched.max_evals, sched.seed, tol);

  std::vector<InverseSolution> results(chains);
  const int share = sched.max_evals / chains;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < chains; ++c)
    results[c] = anneal_chain(eval, ref, sched, warm_start, share, sched.seed + 0x9E3779B9ULL * c, tol);
  InverseSolution best = results[0];
  int evals = 0;
  for (const auto& r : results) {
    evals += r.evals;
    if (better(r, best)) best = r;
  }
  best.evals = evals;
  return best;
}

InverseSolution brute_force_serial(const WrenchFormSet& forms, const Wrench& ref, int phase_step_deg,
                                   double amplitude, int gauge_electrode, const ErrorTolerances& tol) {
  const int n = forms.n();
  check_gauge(n, gauge_electrode);
  const long long states = grid_states(n, phase_step_deg);
  return brute_force_range(FormEvaluator(forms), ref, n, phase_step_deg, amplitude, gauge_electrode, 0,
                           states, tol);
}

InverseSolution brute_force(const WrenchFormSet& forms, const Wrench& ref, int phase_step_deg,
                            double amplitude, int gauge_electrode, const ErrorTolerances& tol) {
  const int n = forms.n();
  check_gauge(n, gauge_electrode);
  const long long states = grid_states(n, phase_step_deg);
  const FormEvaluator eval(forms);
  // Fixed chunks reduced in index order: the result matches the serial scan exactly.
  const long long chunk = 4096;
  const long long chunks = (states + chunk - 1) / chunk;
  std::vector<InverseSolution> parts(chunks);
#pragma omp parallel for schedule(dynamic)
  for (long long c = 0; c < chunks; ++c)
    parts[c] = brute_force_range(eval, ref, n, phase_step_deg, amplitude, gauge_electrode, c * chunk,
                                 std::min(states, (c + 1) * chunk), tol);
  InverseSolution best = parts[0];
  for (long long c = 1; c < chunks; ++c)
    if (parts[c].error.cost < best.error.cost) best = parts[c];
  best.evals = static_cast<int>(states);
  return best;
}

}  // namespace depman
