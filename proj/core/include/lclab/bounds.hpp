#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lclab::bounds {

// The inequality families carried by constant ledgers. Names are part of the
// ledger JSON contract.
enum class FamilyId {
  Paouris,
  UncondOrderStat,
  ExpConcOrderStat,
  MainOrderStat,
  EstNMoment,
  LrTailSmall,
  LrTailLarge,
  LinfTail,
  EstLarger,
  Cond1,
  Cond2,
  LrMomentSmall,
  LrMomentLarge,
  LinfMoment,
};

std::string family_name(FamilyId id);
FamilyId family_from_name(const std::string& name);

// --- tail/moment bound formulas; each rhs has a companion envelope giving
// --- the region where the bound is asserted.

// Euclidean-norm tail: event {|X| >= C t sqrt(n)} vs exp(-t sqrt(n)), t >= 1.
// The constant lives inside the event, so the rhs takes no C.
double paouris_rhs(double t, int n);
bool paouris_in_envelope(double t);

// Order-statistic tail for unconditional ensembles: exp(-k t / C) asserted
// for t >= C log(en/k), with the explicit union-bound intermediate
// (2en/k)^k exp(-k t / C) exposed for diagnostics.
double uncond_orderstat_rhs(int k, double t, double C);
double uncond_union_intermediate(int n, int k, double t, double C);

// Order-statistic tail under exponential concentration with constant alpha:
// exp(-sqrt(k) t / (3 alpha)) asserted for t >= 8 alpha log(en/k).
double expconc_orderstat_rhs(int k, double t, double alpha);
double expconc_envelope(int n, int k, double alpha);

// General order-statistic tail: exp(-sqrt(k) t / C) for t >= C log(en/k).
double main_orderstat_rhs(int k, double t, double C);
double orderstat_envelope(int n, int k, double C);

// Exceedance-count moment bound: E (t^2 N(t))^p <= (C p)^{2p} asserted on
// t >= C log(n t^2 / p^2). The envelope threshold is the largest fixed point
// of t -> C log(n t^2 / p^2); when the map has no fixed point it lies below
// the identity everywhere and the condition holds for every t >= 1.
double estN_rhs(double p, double C);

struct EstNEnvelope {
  enum class Status { threshold, all_t, not_converged };
  Status status = Status::threshold;
  double t_star = 1.0;
  int iterations = 0;
  bool contraction_certified = false;  // 2C/t* < 1 at the returned point
  // Proof-side diagnostics, logged but not enforced:
  bool satisfies_tn_10p = false;       // t sqrt(n) >= 10 p at t*
  bool satisfies_t2n_p2 = false;       // t^2 n exp(-t/C) <= p^2 at t*
};

EstNEnvelope envelope_threshold_estN(double n, double p, double C);

// lr-norm tails (r in [1,2], r in [2,inf), r = inf):
double lr_tail_small_rhs(double t, int n, double r, double C);   // exp(-t n^{1/2-1/r}/C)
double lr_tail_small_envelope(int n, double r, double C);        // C n^{1/r}
double lr_tail_large_rhs(double t, double C);                    // exp(-t/C)
double lr_tail_large_envelope(int n, double r, double C);        // C r n^{1/r}
double linf_tail_rhs(double t, double C);                        // exp(-t/C)
double linf_tail_envelope(int n, double C);                      // C log n

// Refined lr tail for r > 2: exp(-((r-2)/r)^{1/r} t / C) asserted for
// t >= C (r n^{1/r} + (r/(r-2))^{1/r} log n). Throws for r <= 2.
double estlarger_rhs(double t, double r, double C);
double estlarger_envelope(int n, double r, double C);

// Simplified constant cap C delta^{-1/2} valid for all r >= 2 + delta.
double larger_constant_cap(double delta, double C);

// lr-norm moment bounds for p >= 2: C(n^{1/r} + n^{1/r-1/2} p) for r in [1,2],
// C(r n^{1/r} + p) for r >= 2, C(log n + p) for r = inf.
double lr_moment_rhs(double p, int n, double r, double C);
// Refined form for r > 2: C(r n^{1/r} + (r/(r-2))^{1/r} (log n + p)).
double lr_moment_refined_rhs(double p, int n, double r, double C);

// Conditional estimates for A = {X in K}, 0 < P(A) <= 1/e:
// cond1: sum_i P(A and {X_i >= t}) <= C pA (t^{-2} log^2 pA + n e^{-t/C}), t >= C.
// cond2: #{i : P(A and {X_i >= t}) >= e^{-u} pA} <= C u^2 t^{-2} log^2 pA, 1 <= u <= t/C.
double cond1_rhs(double pA, double t, int n, double C);
double cond2_count_rhs(double pA, double t, double u, double C);
bool cond_pA_in_envelope(double pA);

// Chebyshev reduction for order statistics: 2 (C p / (t sqrt k))^{2p}.
// At p = t sqrt(k) / (e C) this equals 2 e^{-2p} identically.
double chebyshev_orderstat_bound(int k, double t, double p, double C);

// --- constant fitting ---

// One grid cell of a bound check: the abscissa (t, or p for moment
// families), auxiliary parameters, and the empirical value with its CI.
struct Cell {
  double t = 0.0;
  std::map<std::string, double> params;  // k, r, p, u, pA as applicable
  double empirical = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long count = 0;
};

// Family behavior at a candidate constant. `refresh` lets families whose
// empirical side depends on C (the constant inside the event, or an oracle
// evaluated at a C-dependent threshold) recompute the cell before checking.
struct FamilyEval {
  std::function<double(const Cell&, double)> rhs;
  std::function<bool(const Cell&, double)> in_envelope;
  std::function<void(Cell&, double)> refresh;  // may be null
};

struct CellRecord {
  Cell cell;
  double rhs = 0.0;
  bool in_envelope = false;
  bool pass = false;          // in envelope and ci_high <= rhs
  bool unconstrained = false; // outside the envelope of every grid constant
};

// Per-inequality fitted-constant record; serializes to the ledger JSON
// {"family","params","fitted_C","cells":[...]}.
struct ConstantLedger {
  FamilyId family = FamilyId::MainOrderStat;
  std::map<std::string, double> params;
  std::vector<double> search_grid;
  bool qualified = false;   // some grid constant satisfies every in-envelope cell
  double fitted_C = 0.0;    // smallest such constant (grid max when unqualified)
  std::vector<CellRecord> cells;           // status at fitted_C
  std::vector<std::size_t> violating_cells;  // indices blocking the grid max
};

// Smallest C in `search_grid` (strictly increasing) such that every cell
// whose abscissa satisfies the envelope at C passes ci_high <= rhs(t; C).
ConstantLedger fit_constant(FamilyId family, std::map<std::string, double> params,
                            std::vector<Cell> cells, std::span<const double> search_grid,
                            const FamilyEval& eval);

// Default geometric search grid 0.25 * 2^{j/4} up to 64.
std::vector<double> default_search_grid();

std::string ledger_to_json(const ConstantLedger& ledger);
std::string ledger_to_csv(const ConstantLedger& ledger);

}  // namespace lclab::bounds
