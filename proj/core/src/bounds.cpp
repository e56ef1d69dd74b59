#include "lclab/bounds.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lclab::bounds {

namespace {
const std::pair<FamilyId, const char*> kFamilyNames[] = {
    {FamilyId::Paouris, "Paouris"},
    {FamilyId::UncondOrderStat, "UncondOrderStat"},
    {FamilyId::ExpConcOrderStat, "ExpConcOrderStat"},
    {FamilyId::MainOrderStat, "MainOrderStat"},
    {FamilyId::EstNMoment, "EstNMoment"},
    {FamilyId::LrTailSmall, "LrTailSmall"},
    {FamilyId::LrTailLarge, "LrTailLarge"},
    {FamilyId::LinfTail, "LinfTail"},
    {FamilyId::EstLarger, "EstLarger"},
    {FamilyId::Cond1, "Cond1"},
    {FamilyId::Cond2, "Cond2"},
    {FamilyId::LrMomentSmall, "LrMomentSmall"},
    {FamilyId::LrMomentLarge, "LrMomentLarge"},
    {FamilyId::LinfMoment, "LinfMoment"},
};
}  // namespace

std::string family_name(FamilyId id) {
  for (const auto& [family, name] : kFamilyNames)
    if (family == id) return name;
  throw std::logic_error("unknown FamilyId");
}

FamilyId family_from_name(const std::string& name) {
  for (const auto& [family, family_str] : kFamilyNames)
    if (name == family_str) return family;
  throw std::invalid_argument("unknown bound family: " + name);
}

double paouris_rhs(double t, int n) { return std::exp(-t * std::sqrt(static_cast<double>(n))); }

bool paouris_in_envelope(double t) { return t >= 1.0; }

double orderstat_envelope(int n, int k, double C) {
  if (k < 1 || k > n) throw std::invalid_argument("orderstat_envelope: need 1 <= k <= n");
  return C * std::log(std::exp(1.0) * n / static_cast<double>(k));
}

double uncond_orderstat_rhs(int k, double t, double C) { return std::exp(-k * t / C); }

double uncond_union_intermediate(int n, int k, double t, double C) {
  const double base = 2.0 * std::exp(1.0) * n / static_cast<double>(k);
  return std::exp(k * std::log(base) - k * t / C);
}

double expconc_orderstat_rhs(int k, double t, double alpha) {
  return std::exp(-std::sqrt(static_cast<double>(k)) * t / (3.0 * alpha));
}

double expconc_envelope(int n, int k, double alpha) {
  return 8.0 * orderstat_envelope(n, k, alpha);
}

double main_orderstat_rhs(int k, double t, double C) {
  return std::exp(-std::sqrt(static_cast<double>(k)) * t / C);
}

double estN_rhs(double p, double C) { return std::pow(C * p, 2.0 * p); }

EstNEnvelope envelope_threshold_estN(double n, double p, double C) {
  if (!(p >= 1.0)) throw std::invalid_argument("envelope_threshold_estN: need p >= 1");
  if (!(C > 0.0)) throw std::invalid_argument("envelope_threshold_estN: need C > 0");

  const auto phi = [&](double t) { return C * std::log(n * t * t / (p * p)); };

  EstNEnvelope envelope;
  const auto finish = [&](double t_star) {
    envelope.t_star = t_star;
    envelope.contraction_certified = 2.0 * C / t_star < 1.0;
    envelope.satisfies_tn_10p = t_star * std::sqrt(n) >= 10.0 * p;
    envelope.satisfies_t2n_p2 = t_star * t_star * n * std::exp(-t_star / C) <= p * p;
    return envelope;
  };

  // Start above the largest fixed point: t = phi(t) = a + 2C log t with
  // a = C log(n/p^2) implies sqrt(t) <= 2C + sqrt(4C^2 + max(a,0)).
  const double a = C * std::log(n / (p * p));
  const double root = 2.0 * C + std::sqrt(4.0 * C * C + std::max(a, 0.0));
  double t = std::max({1.0, C * std::log(n * std::max(C, 1.0) * std::max(C, 1.0) / (p * p)),
                       root * root});

  for (int iter = 1; iter <= 100; ++iter) {
    envelope.iterations = iter;
    const double next = phi(t);
    if (!(next > 0.0) || !std::isfinite(next)) {
      // The map fell below zero: no fixed point at or above here, which
      // means phi < identity everywhere and every t >= 1 is admissible.
      envelope.status = EstNEnvelope::Status::all_t;
      return finish(1.0);
    }
    if (std::abs(next - t) <= 1e-10 * std::max(t, 1.0)) {
      envelope.status = EstNEnvelope::Status::threshold;
      return finish(std::max(next, 1.0));
    }
    if (next < 1.0 && phi(1.0) < 1.0) {
      envelope.status = EstNEnvelope::Status::all_t;
      return finish(1.0);
    }
    t = next;
  }

  // Slow (near-tangent) convergence: polish with Newton on g(t) = t - phi(t),
  // which is convex with g' > 0 on the stable side.
  for (int iter = 0; iter < 50; ++iter) {
    const double g = t - phi(t);
    const double dg = 1.0 - 2.0 * C / t;
    if (dg <= 0.0) break;
    const double next = t - g / dg;
    if (!(next > 0.0) || !std::isfinite(next)) break;
    if (std::abs(next - t) <= 1e-12 * std::max(t, 1.0)) {
      envelope.status = EstNEnvelope::Status::threshold;
      return finish(std::max(next, 1.0));
    }
    t = next;
  }
  envelope.status = EstNEnvelope::Status::not_converged;
  return finish(std::max(t, 1.0));
}

double lr_tail_small_rhs(double t, int n, double r, double C) {
  return std::exp(-t * std::pow(static_cast<double>(n), 0.5 - 1.0 / r) / C);
}

double lr_tail_small_envelope(int n, double r, double C) {
  return C * std::pow(static_cast<double>(n), 1.0 / r);
}

double lr_tail_large_rhs(double t, double C) { return std::exp(-t / C); }

double lr_tail_large_envelope(int n, double r, double C) {
  return C * r * std::pow(static_cast<double>(n), 1.0 / r);
}

double linf_tail_rhs(double t, double C) { return std::exp(-t / C); }

double linf_tail_envelope(int n, double C) { return C * std::log(static_cast<double>(n)); }

double estlarger_rhs(double t, double r, double C) {
  if (!(r > 2.0)) throw std::invalid_argument("estlarger_rhs: need r > 2");
  return std::exp(-std::pow((r - 2.0) / r, 1.0 / r) * t / C);
}

double estlarger_envelope(int n, double r, double C) {
  if (!(r > 2.0)) throw std::invalid_argument("estlarger_envelope: need r > 2");
  return C * (r * std::pow(static_cast<double>(n), 1.0 / r) +
              std::pow(r / (r - 2.0), 1.0 / r) * std::log(static_cast<double>(n)));
}

double larger_constant_cap(double delta, double C) {
  if (!(delta > 0.0)) throw std::invalid_argument("larger_constant_cap: need delta > 0");
  return C / std::sqrt(delta);
}

double lr_moment_rhs(double p, int n, double r, double C) {
  if (!(p >= 2.0)) throw std::invalid_argument("lr_moment_rhs: need p >= 2");
  const double nn = static_cast<double>(n);
  if (std::isinf(r)) return C * (std::log(nn) + p);
  if (!(r >= 1.0)) throw std::invalid_argument("lr_moment_rhs: need r >= 1");
  if (r <= 2.0) return C * (std::pow(nn, 1.0 / r) + std::pow(nn, 1.0 / r - 0.5) * p);
  return C * (r * std::pow(nn, 1.0 / r) + p);
}

double lr_moment_refined_rhs(double p, int n, double r, double C) {
  if (!(p >= 2.0)) throw std::invalid_argument("lr_moment_refined_rhs: need p >= 2");
  if (!(r > 2.0)) throw std::invalid_argument("lr_moment_refined_rhs: need r > 2");
  const double nn = static_cast<double>(n);
  return C * (r * std::pow(nn, 1.0 / r) +
              std::pow(r / (r - 2.0), 1.0 / r) * (std::log(nn) + p));
}

bool cond_pA_in_envelope(double pA) { return pA > 0.0 && pA <= std::exp(-1.0); }

double cond1_rhs(double pA, double t, int n, double C) {
  if (!(pA > 0.0 && pA <= 1.0)) throw std::invalid_argument("cond1_rhs: pA outside (0,1]");
  const double log_pa = std::log(pA);
  return C * pA * (log_pa * log_pa / (t * t) + n * std::exp(-t / C));
}

double cond2_count_rhs(double pA, double t, double u, double C) {
  if (!(pA > 0.0 && pA <= 1.0)) throw std::invalid_argument("cond2_count_rhs: pA outside (0,1]");
  const double log_pa = std::log(pA);
  return C * u * u * log_pa * log_pa / (t * t);
}

double chebyshev_orderstat_bound(int k, double t, double p, double C) {
  return 2.0 * std::pow(C * p / (t * std::sqrt(static_cast<double>(k))), 2.0 * p);
}

std::vector<double> default_search_grid() {
  std::vector<double> grid;
  const double ratio = std::pow(2.0, 0.25);
  for (double c = 0.25; c <= 64.0 * (1.0 + 1e-12); c *= ratio) grid.push_back(c);
  return grid;
}

ConstantLedger fit_constant(FamilyId family, std::map<std::string, double> params,
                            std::vector<Cell> cells, std::span<const double> search_grid,
                            const FamilyEval& eval) {
  if (cells.empty()) throw std::invalid_argument("fit_constant: no cells");
  if (search_grid.empty()) throw std::invalid_argument("fit_constant: empty search grid");
  for (std::size_t i = 1; i < search_grid.size(); ++i)
    if (!(search_grid[i] > search_grid[i - 1]))
      throw std::invalid_argument("fit_constant: search grid must be strictly increasing");
  if (!eval.rhs || !eval.in_envelope)
    throw std::invalid_argument("fit_constant: rhs and in_envelope are required");

  ConstantLedger ledger;
  ledger.family = family;
  ledger.params = std::move(params);
  ledger.search_grid.assign(search_grid.begin(), search_grid.end());

  std::vector<bool> ever_in_envelope(cells.size(), false);

  const auto evaluate = [&](double C, std::vector<CellRecord>* records,
                            std::vector<std::size_t>* violations) {
    bool all_pass = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      Cell cell = cells[i];
      if (eval.refresh) eval.refresh(cell, C);
      const bool inside = eval.in_envelope(cell, C);
      const double rhs = eval.rhs(cell, C);
      const bool pass = inside ? cell.ci_high <= rhs : true;
      if (inside) ever_in_envelope[i] = true;
      if (!pass) {
        all_pass = false;
        if (violations) violations->push_back(i);
      }
      if (records) records->push_back({cell, rhs, inside, inside && pass, false});
    }
    return all_pass;
  };

  std::optional<double> fitted;
  for (double C : search_grid) {
    if (evaluate(C, nullptr, nullptr)) {
      fitted = C;
      break;
    }
  }

  ledger.qualified = fitted.has_value();
  ledger.fitted_C = fitted.value_or(search_grid.back());
  evaluate(ledger.fitted_C, &ledger.cells, ledger.qualified ? nullptr : &ledger.violating_cells);

  // A cell outside the envelope of every grid constant never constrains the fit.
  std::fill(ever_in_envelope.begin(), ever_in_envelope.end(), false);
  for (double C : search_grid) evaluate(C, nullptr, nullptr);
  for (std::size_t i = 0; i < cells.size(); ++i)
    ledger.cells[i].unconstrained = !ever_in_envelope[i];

  return ledger;
}

std::string ledger_to_json(const ConstantLedger& ledger) {
  nlohmann::ordered_json j;
  j["family"] = family_name(ledger.family);
  j["params"] = ledger.params;
  j["fitted_C"] = ledger.fitted_C;
  j["qualified"] = ledger.qualified;
  j["search_grid"] = ledger.search_grid;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& record : ledger.cells) {
    nlohmann::ordered_json c;
    c["t"] = record.cell.t;
    for (const auto& [key, value] : record.cell.params) c[key] = value;
    c["empirical"] = record.cell.empirical;
    c["ci_low"] = record.cell.ci_low;
    c["ci_high"] = record.cell.ci_high;
    c["count"] = record.cell.count;
    c["rhs"] = record.rhs;
    c["in_envelope"] = record.in_envelope;
    c["pass"] = record.pass;
    c["unconstrained"] = record.unconstrained;
    cells.push_back(c);
  }
  j["cells"] = cells;
  if (!ledger.qualified) j["violating_cells"] = ledger.violating_cells;
  return j.dump(2);
}

std::string ledger_to_csv(const ConstantLedger& ledger) {
  std::string out = "family,fitted_C,t,k,r,p,u,pA,empirical,ci_low,ci_high,rhs,in_envelope,pass\n";
  const std::string name = family_name(ledger.family);
  char line[512];
  const auto param = [](const Cell& cell, const char* key) {
    const auto it = cell.params.find(key);
    return it == cell.params.end() ? 0.0 : it->second;
  };
  for (const auto& record : ledger.cells) {
    std::snprintf(line, sizeof(line),
                  "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n",
                  name.c_str(), ledger.fitted_C, record.cell.t, param(record.cell, "k"),
                  param(record.cell, "r"), param(record.cell, "p"), param(record.cell, "u"),
                  param(record.cell, "pA"), record.cell.empirical, record.cell.ci_low,
                  record.cell.ci_high, record.rhs, record.in_envelope ? 1 : 0,
                  record.pass ? 1 : 0);
    out += line;
  }
  return out;
}

}  // namespace lclab::bounds
