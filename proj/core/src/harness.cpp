#include "lclab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lclab/combinatorics.hpp"
#include "lclab/isotropy.hpp"
#include "lclab/parallel.hpp"
#include "lclab/rng.hpp"
#include "lclab/stats.hpp"

namespace lclab::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr long kChunk = 4096;
constexpr double kInvE = 0.36787944117144233;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("io error: cannot write " + tmp);
  }
  fs::rename(tmp, path);
}

std::vector<long> dyadic_ks(int n) {
  std::vector<long> ks;
  for (long k = 1; 2 * k <= n; k *= 2) ks.push_back(k);
  if (ks.empty()) ks.push_back(1);
  return ks;
}

FamilyConfig with_defaults(FamilyConfig fc, int n) {
  using bounds::FamilyId;
  const auto defaulted = [](std::vector<double>& grid, std::initializer_list<double> values) {
    if (grid.empty()) grid.assign(values);
  };
  switch (fc.id) {
    case FamilyId::MainOrderStat:
    case FamilyId::UncondOrderStat:
      if (fc.k.empty()) fc.k = dyadic_ks(n);
      defaulted(fc.t_multipliers, {0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0});
      break;
    case FamilyId::ExpConcOrderStat:
      if (fc.k.empty()) fc.k = dyadic_ks(n);
      defaulted(fc.t_multipliers, {1.0, 1.5, 2.0});
      break;
    case FamilyId::Paouris:
      defaulted(fc.t_values, {1.0, 1.25, 1.5, 2.0});
      break;
    case FamilyId::LrTailSmall:
      defaulted(fc.r, {1.0});
      defaulted(fc.t_multipliers, {0.6, 0.8, 0.9, 1.0, 1.1, 1.25});
      break;
    case FamilyId::LrTailLarge:
      defaulted(fc.r, {4.0});
      defaulted(fc.t_multipliers, {0.5, 0.75, 1.0, 1.25});
      break;
    case FamilyId::LinfTail:
      fc.r = {std::numeric_limits<double>::infinity()};
      defaulted(fc.t_multipliers, {0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0});
      break;
    case FamilyId::EstLarger:
      defaulted(fc.r, {4.0});
      defaulted(fc.t_multipliers, {0.5, 0.75, 1.0, 1.25});
      break;
    case FamilyId::Cond1:
      defaulted(fc.t_values, {2.0, 3.0, 4.0, 6.0, 8.0});
      break;
    case FamilyId::Cond2:
      defaulted(fc.t_values, {4.0, 6.0, 8.0});
      defaulted(fc.u, {1.0, 1.5, 2.0});
      break;
    case FamilyId::EstNMoment:
      defaulted(fc.p, {1.0, 2.0, 4.0});
      if (fc.mode.empty()) fc.mode = "oracle";
      break;
    case FamilyId::LrMomentSmall:
      defaulted(fc.r, {1.0});
      defaulted(fc.p, {2.0, 4.0});
      break;
    case FamilyId::LrMomentLarge:
      defaulted(fc.r, {4.0});
      defaulted(fc.p, {2.0, 4.0});
      break;
    case FamilyId::LinfMoment:
      fc.r = {std::numeric_limits<double>::infinity()};
      defaulted(fc.p, {2.0, 4.0});
      break;
  }
  if (fc.mode.empty()) fc.mode = "empirical";
  return fc;
}

bool is_plain_exponential(const dist::DistributionSpec& spec) {
  return spec.kind() == dist::Kind::ExponentialProduct && !spec.has_rotation();
}

// Reason a family cannot run against a distribution, or empty if it can.
std::string incompatibility(const FamilyConfig& fc, const dist::DistributionSpec& spec) {
  using bounds::FamilyId;
  if ((fc.id == FamilyId::Cond1 || fc.id == FamilyId::Cond2) && !is_plain_exponential(spec))
    return "conditional ledger needs the plain exponential ensemble (exact threshold for P(A))";
  if (fc.id == FamilyId::EstNMoment && fc.mode == "oracle" && !is_plain_exponential(spec))
    return "EstNMoment oracle mode needs the plain exponential ensemble";
  if (fc.id == FamilyId::UncondOrderStat && fc.mode == "oracle" && !is_plain_exponential(spec))
    return "UncondOrderStat oracle mode needs the plain exponential ensemble";
  if (fc.id == FamilyId::UncondOrderStat && spec.has_rotation())
    return "UncondOrderStat asserts unconditionality, which rotations break";
  return "";
}

double envelope_base(bounds::FamilyId id, int n, long k, double r) {
  using bounds::FamilyId;
  switch (id) {
    case FamilyId::MainOrderStat:
    case FamilyId::UncondOrderStat:
      return bounds::orderstat_envelope(n, static_cast<int>(k), 1.0);
    case FamilyId::ExpConcOrderStat:
      return bounds::expconc_envelope(n, static_cast<int>(k), 1.0);
    case FamilyId::LrTailSmall:
      return bounds::lr_tail_small_envelope(n, r, 1.0);
    case FamilyId::LrTailLarge:
      return bounds::lr_tail_large_envelope(n, r, 1.0);
    case FamilyId::LinfTail:
      return bounds::linf_tail_envelope(n, 1.0);
    case FamilyId::EstLarger:
      return bounds::estlarger_envelope(n, r, 1.0);
    default:
      throw std::logic_error("envelope_base: family has no multiplier grid");
  }
}

struct GroupLedgers {
  std::vector<std::pair<std::string, bounds::ConstantLedger>> ledgers;  // family name, ledger
  ordered_json diagnostics;
  std::vector<std::string> skipped;
};

GroupLedgers run_group(const ExperimentConfig& cfg, const dist::DistributionSpec& spec,
                       int workers) {
  const int n = spec.n();
  const long total = cfg.sample_count;
  const double conf = cfg.confidence;
  const std::string label = spec.label();

  const std::vector<double> grid =
      cfg.constant_search_grid.empty() ? bounds::default_search_grid() : cfg.constant_search_grid;

  GroupLedgers out;

  // --- resolve family plans ---
  struct OrderPlan {
    FamilyConfig fc;
    std::vector<std::vector<double>> ts;  // per k
    std::vector<std::vector<long>> counts;
  };
  struct LrTailPlan {
    FamilyConfig fc;
    std::vector<std::vector<double>> ts;  // per r
    std::vector<std::vector<long>> counts;
  };
  struct CondPlan {
    FamilyConfig fc;
    double a = 0.0;
    long in_A = 0;
    std::vector<std::vector<double>> rowvals;     // Cond1: per t, per row, 1_A * N(t)
    std::vector<std::vector<long>> coord_counts;  // Cond2: per t, per coordinate
  };

  std::vector<OrderPlan> order_plans;
  std::vector<LrTailPlan> lrtail_plans;
  std::vector<FamilyConfig> moment_plans;
  std::vector<CondPlan> cond_plans;
  std::vector<FamilyConfig> estn_plans;
  std::vector<double> paouris_ts;

  std::set<double> needed_rs;
  bool need_sorted = false;
  bool need_norm2 = false;

  for (const FamilyConfig& raw : cfg.families) {
    const std::string reason = incompatibility(raw, spec);
    if (!reason.empty()) {
      out.skipped.push_back(bounds::family_name(raw.id) + " on " + label + ": " + reason);
      continue;
    }
    FamilyConfig fc = with_defaults(raw, n);
    using bounds::FamilyId;
    switch (fc.id) {
      case FamilyId::MainOrderStat:
      case FamilyId::UncondOrderStat:
      case FamilyId::ExpConcOrderStat: {
        OrderPlan plan;
        plan.fc = fc;
        for (long k : fc.k) {
          std::vector<double> ts;
          for (double m : fc.t_multipliers) ts.push_back(m * envelope_base(fc.id, n, k, 0.0));
          plan.ts.push_back(std::move(ts));
          plan.counts.emplace_back(plan.ts.back().size(), 0);
        }
        need_sorted = true;
        order_plans.push_back(std::move(plan));
        break;
      }
      case FamilyId::Paouris:
        paouris_ts = fc.t_values;
        need_norm2 = true;
        break;
      case FamilyId::LrTailSmall:
      case FamilyId::LrTailLarge:
      case FamilyId::LinfTail:
      case FamilyId::EstLarger: {
        LrTailPlan plan;
        plan.fc = fc;
        for (double r : fc.r) {
          std::vector<double> ts;
          for (double m : fc.t_multipliers) ts.push_back(m * envelope_base(fc.id, n, 0, r));
          plan.ts.push_back(std::move(ts));
          plan.counts.emplace_back(plan.ts.back().size(), 0);
          needed_rs.insert(r);
        }
        lrtail_plans.push_back(std::move(plan));
        break;
      }
      case FamilyId::LrMomentSmall:
      case FamilyId::LrMomentLarge:
      case FamilyId::LinfMoment:
        for (double r : fc.r) needed_rs.insert(r);
        moment_plans.push_back(fc);
        break;
      case FamilyId::Cond1:
      case FamilyId::Cond2: {
        CondPlan plan;
        plan.fc = fc;
        plan.a = -std::log(2.0 * fc.pA) / kSqrt2;  // P(X_1 >= a) = pA exactly
        if (fc.id == FamilyId::Cond1)
          plan.rowvals.assign(fc.t_values.size(),
                              std::vector<double>(static_cast<std::size_t>(total), 0.0));
        else
          plan.coord_counts.assign(fc.t_values.size(), std::vector<long>(n, 0));
        cond_plans.push_back(std::move(plan));
        break;
      }
      case FamilyId::EstNMoment:
        estn_plans.push_back(fc);
        break;
    }
  }

  // --- one streaming pass over the sample, reused by every family ---
  std::vector<double> norm2(need_norm2 ? static_cast<std::size_t>(total) : 0);
  std::map<double, std::vector<double>> lr_values;
  for (double r : needed_rs) lr_values[r].resize(static_cast<std::size_t>(total));

  const long n_chunks = (total + kChunk - 1) / kChunk;
  std::vector<Eigen::VectorXd> chunk_sum(static_cast<std::size_t>(n_chunks));
  std::vector<Eigen::MatrixXd> chunk_gram(static_cast<std::size_t>(n_chunks));
  std::mutex tally_mutex;

  // Polytope ensembles are chain-sampled up front; product ensembles are
  // generated chunk-by-chunk from per-row streams.
  dist::SampleBatch polytope_batch;
  const bool chain_sampled = spec.kind() == dist::Kind::PolytopeUniform;
  if (chain_sampled) polytope_batch = dist::sample(spec, total, cfg.seed, workers);

  par::parallel_for_chunks(total, kChunk, workers, [&](std::int64_t begin, std::int64_t end,
                                                       std::int64_t chunk_index) {
    const long rows = end - begin;
    dist::RowMatrix local;
    const dist::RowMatrix* source = nullptr;
    long source_row0 = 0;
    if (chain_sampled) {
      source = &polytope_batch.data;
      source_row0 = 0;
    } else {
      local.resize(rows, n);
      dist::sample_rows(spec, cfg.seed, begin, end, local, begin);
      source = &local;
      source_row0 = begin;
    }

    std::vector<std::vector<std::vector<long>>> local_order(order_plans.size());
    for (std::size_t f = 0; f < order_plans.size(); ++f) {
      local_order[f].resize(order_plans[f].counts.size());
      for (std::size_t ki = 0; ki < order_plans[f].counts.size(); ++ki)
        local_order[f][ki].assign(order_plans[f].counts[ki].size(), 0);
    }
    std::vector<std::vector<std::vector<long>>> local_lr(lrtail_plans.size());
    for (std::size_t f = 0; f < lrtail_plans.size(); ++f) {
      local_lr[f].resize(lrtail_plans[f].counts.size());
      for (std::size_t ri = 0; ri < lrtail_plans[f].counts.size(); ++ri)
        local_lr[f][ri].assign(lrtail_plans[f].counts[ri].size(), 0);
    }
    std::vector<long> local_in_A(cond_plans.size(), 0);
    std::vector<std::vector<std::vector<long>>> local_coord(cond_plans.size());
    for (std::size_t f = 0; f < cond_plans.size(); ++f)
      if (!cond_plans[f].coord_counts.empty())
        local_coord[f].assign(cond_plans[f].coord_counts.size(), std::vector<long>(n, 0));

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> sorted_abs(static_cast<std::size_t>(n));

    for (long i = begin; i < end; ++i) {
      const auto row = source->row(i - source_row0);
      const std::span<const double> x(row.data(), static_cast<std::size_t>(n));

      if (need_sorted) {
        for (int j = 0; j < n; ++j) sorted_abs[static_cast<std::size_t>(j)] = std::abs(x[j]);
        std::sort(sorted_abs.begin(), sorted_abs.end(), std::greater<double>());
        for (std::size_t f = 0; f < order_plans.size(); ++f) {
          const OrderPlan& plan = order_plans[f];
          for (std::size_t ki = 0; ki < plan.fc.k.size(); ++ki) {
            const double kth = sorted_abs[static_cast<std::size_t>(plan.fc.k[ki] - 1)];
            for (std::size_t ti = 0; ti < plan.ts[ki].size(); ++ti)
              local_order[f][ki][ti] += kth >= plan.ts[ki][ti] ? 1 : 0;
          }
        }
      }
      if (need_norm2) norm2[static_cast<std::size_t>(i)] = stats::lr_norm(x, 2.0);
      for (auto& [r, values] : lr_values) values[static_cast<std::size_t>(i)] = stats::lr_norm(x, r);
      for (std::size_t f = 0; f < lrtail_plans.size(); ++f) {
        const LrTailPlan& plan = lrtail_plans[f];
        for (std::size_t ri = 0; ri < plan.fc.r.size(); ++ri) {
          const double value = lr_values[plan.fc.r[ri]][static_cast<std::size_t>(i)];
          for (std::size_t ti = 0; ti < plan.ts[ri].size(); ++ti)
            local_lr[f][ri][ti] += value >= plan.ts[ri][ti] ? 1 : 0;
        }
      }
      for (std::size_t f = 0; f < cond_plans.size(); ++f) {
        CondPlan& plan = cond_plans[f];
        if (x[0] < plan.a) continue;
        ++local_in_A[f];
        for (std::size_t ti = 0; ti < plan.fc.t_values.size(); ++ti) {
          const double t = plan.fc.t_values[ti];
          if (!plan.rowvals.empty()) {
            plan.rowvals[ti][static_cast<std::size_t>(i)] =
                static_cast<double>(stats::exceedance_count(x, t));
          } else {
            for (int j = 0; j < n; ++j)
              local_coord[f][ti][static_cast<std::size_t>(j)] += x[j] >= t ? 1 : 0;
          }
        }
      }
      sum += Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    }
    gram.noalias() = source->middleRows(begin - source_row0, rows).transpose() *
                     source->middleRows(begin - source_row0, rows);
    chunk_sum[static_cast<std::size_t>(chunk_index)] = sum;
    chunk_gram[static_cast<std::size_t>(chunk_index)] = gram;

    std::lock_guard<std::mutex> lock(tally_mutex);
    for (std::size_t f = 0; f < order_plans.size(); ++f)
      for (std::size_t ki = 0; ki < local_order[f].size(); ++ki)
        for (std::size_t ti = 0; ti < local_order[f][ki].size(); ++ti)
          order_plans[f].counts[ki][ti] += local_order[f][ki][ti];
    for (std::size_t f = 0; f < lrtail_plans.size(); ++f)
      for (std::size_t ri = 0; ri < local_lr[f].size(); ++ri)
        for (std::size_t ti = 0; ti < local_lr[f][ri].size(); ++ti)
          lrtail_plans[f].counts[ri][ti] += local_lr[f][ri][ti];
    for (std::size_t f = 0; f < cond_plans.size(); ++f) {
      cond_plans[f].in_A += local_in_A[f];
      for (std::size_t ti = 0; ti < local_coord[f].size(); ++ti)
        for (int j = 0; j < n; ++j)
          cond_plans[f].coord_counts[ti][static_cast<std::size_t>(j)] +=
              local_coord[f][ti][static_cast<std::size_t>(j)];
    }
  });

  // --- diagnostics: moments accumulated in fixed chunk order ---
  {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    for (long c = 0; c < n_chunks; ++c) {
      sum += chunk_sum[static_cast<std::size_t>(c)];
      gram += chunk_gram[static_cast<std::size_t>(c)];
    }
    const Eigen::VectorXd mean = sum / static_cast<double>(total);
    const Eigen::MatrixXd cov =
        (gram - static_cast<double>(total) * mean * mean.transpose()) /
        static_cast<double>(total - 1);
    out.diagnostics["distribution"] = label;
    out.diagnostics["count"] = total;
    out.diagnostics["max_abs_mean"] = mean.cwiseAbs().maxCoeff();
    out.diagnostics["max_cov_deviation"] =
        (cov - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  }

  if (need_norm2) std::sort(norm2.begin(), norm2.end());

  const std::uint64_t group_seed = cfg.seed ^ fnv1a(label);

  // --- build cells and fit constants ---
  const auto cp_cell = [&](double t, long count) {
    bounds::Cell cell;
    cell.t = t;
    const stats::TailEstimate est = stats::clopper_pearson(count, total, conf);
    cell.empirical = est.point;
    cell.ci_low = est.ci_low;
    cell.ci_high = est.ci_high;
    cell.count = total;
    return cell;
  };
  const auto base_params = [&](std::map<std::string, double> extra = {}) {
    extra["n"] = n;
    extra["count"] = static_cast<double>(total);
    extra["confidence"] = conf;
    return extra;
  };

  for (OrderPlan& plan : order_plans) {
    std::vector<bounds::Cell> cells;
    for (std::size_t ki = 0; ki < plan.fc.k.size(); ++ki) {
      const long k = plan.fc.k[ki];
      for (std::size_t ti = 0; ti < plan.ts[ki].size(); ++ti) {
        bounds::Cell cell;
        if (plan.fc.id == bounds::FamilyId::UncondOrderStat && plan.fc.mode == "oracle") {
          cell.t = plan.ts[ki][ti];
          const double q = dist::exponential_tail_exact(cell.t);
          const double exact = dist::binomial_tail(n, q, static_cast<int>(k));
          cell.empirical = cell.ci_low = cell.ci_high = exact;
          cell.count = 0;
        } else {
          cell = cp_cell(plan.ts[ki][ti], plan.counts[ki][ti]);
        }
        cell.params["k"] = static_cast<double>(k);
        cells.push_back(std::move(cell));
      }
    }
    bounds::FamilyEval eval;
    const bounds::FamilyId id = plan.fc.id;
    eval.rhs = [id, n](const bounds::Cell& cell, double C) {
      const int k = static_cast<int>(cell.params.at("k"));
      switch (id) {
        case bounds::FamilyId::MainOrderStat: return bounds::main_orderstat_rhs(k, cell.t, C);
        case bounds::FamilyId::UncondOrderStat: return bounds::uncond_orderstat_rhs(k, cell.t, C);
        default: return bounds::expconc_orderstat_rhs(k, cell.t, C);
      }
    };
    eval.in_envelope = [id, n](const bounds::Cell& cell, double C) {
      const int k = static_cast<int>(cell.params.at("k"));
      if (id == bounds::FamilyId::ExpConcOrderStat)
        return cell.t >= bounds::expconc_envelope(n, k, C);
      return cell.t >= bounds::orderstat_envelope(n, k, C);
    };
    std::vector<double> family_grid = grid;
    if (plan.fc.id == bounds::FamilyId::ExpConcOrderStat) {
      std::erase_if(family_grid, [](double c) { return c < 1.0; });
      if (family_grid.empty())
        throw std::invalid_argument("ExpConcOrderStat needs alpha >= 1 in the search grid");
    }
    out.ledgers.emplace_back(bounds::family_name(plan.fc.id),
                             bounds::fit_constant(plan.fc.id, base_params(), std::move(cells),
                                                  family_grid, eval));
  }

  if (!paouris_ts.empty()) {
    std::vector<bounds::Cell> cells;
    for (double t : paouris_ts) {
      bounds::Cell cell;
      cell.t = t;
      cells.push_back(cell);
    }
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    bounds::FamilyEval eval;
    eval.refresh = [&, sqrt_n](bounds::Cell& cell, double C) {
      const double threshold = C * cell.t * sqrt_n;
      const long count =
          static_cast<long>(norm2.end() - std::lower_bound(norm2.begin(), norm2.end(), threshold));
      const stats::TailEstimate est = stats::clopper_pearson(count, total, conf);
      cell.empirical = est.point;
      cell.ci_low = est.ci_low;
      cell.ci_high = est.ci_high;
      cell.count = total;
    };
    eval.rhs = [n](const bounds::Cell& cell, double) { return bounds::paouris_rhs(cell.t, n); };
    eval.in_envelope = [](const bounds::Cell& cell, double) {
      return bounds::paouris_in_envelope(cell.t);
    };
    out.ledgers.emplace_back(
        "Paouris", bounds::fit_constant(bounds::FamilyId::Paouris,
                                        base_params({{"constant_side_event", 1.0}}),
                                        std::move(cells), grid, eval));
  }

  for (LrTailPlan& plan : lrtail_plans) {
    std::vector<bounds::Cell> cells;
    for (std::size_t ri = 0; ri < plan.fc.r.size(); ++ri)
      for (std::size_t ti = 0; ti < plan.ts[ri].size(); ++ti) {
        bounds::Cell cell = cp_cell(plan.ts[ri][ti], plan.counts[ri][ti]);
        cell.params["r"] = plan.fc.r[ri];
        cells.push_back(std::move(cell));
      }
    const bounds::FamilyId id = plan.fc.id;
    bounds::FamilyEval eval;
    eval.rhs = [id, n](const bounds::Cell& cell, double C) {
      const double r = cell.params.at("r");
      switch (id) {
        case bounds::FamilyId::LrTailSmall: return bounds::lr_tail_small_rhs(cell.t, n, r, C);
        case bounds::FamilyId::LrTailLarge: return bounds::lr_tail_large_rhs(cell.t, C);
        case bounds::FamilyId::LinfTail: return bounds::linf_tail_rhs(cell.t, C);
        default: return bounds::estlarger_rhs(cell.t, r, C);
      }
    };
    eval.in_envelope = [id, n](const bounds::Cell& cell, double C) {
      const double r = cell.params.at("r");
      switch (id) {
        case bounds::FamilyId::LrTailSmall:
          return cell.t >= bounds::lr_tail_small_envelope(n, r, C);
        case bounds::FamilyId::LrTailLarge:
          return cell.t >= bounds::lr_tail_large_envelope(n, r, C);
        case bounds::FamilyId::LinfTail: return cell.t >= bounds::linf_tail_envelope(n, C);
        default: return cell.t >= bounds::estlarger_envelope(n, r, C);
      }
    };
    out.ledgers.emplace_back(bounds::family_name(id),
                             bounds::fit_constant(id, base_params(), std::move(cells), grid, eval));
  }

  for (const FamilyConfig& fc : moment_plans) {
    std::vector<bounds::Cell> cells;
    std::size_t ordinal = 0;
    for (double r : fc.r)
      for (double p : fc.p) {
        const std::vector<double>& values = lr_values.at(r);
        std::vector<double> powered(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) powered[i] = std::pow(values[i], p);
        const stats::MomentEstimate est = stats::bootstrap_mean(
            powered, conf, cfg.bootstrap_resamples, group_seed + 0x10000ULL * ordinal++);
        bounds::Cell cell;
        cell.t = p;  // moment families use p as the abscissa
        cell.params["r"] = r;
        cell.params["p"] = p;
        cell.empirical = std::pow(est.point, 1.0 / p);
        cell.ci_low = std::pow(est.ci_low, 1.0 / p);
        cell.ci_high = std::pow(est.ci_high, 1.0 / p);
        cell.count = total;
        cells.push_back(std::move(cell));
      }
    const bounds::FamilyId id = fc.id;
    bounds::FamilyEval eval;
    eval.rhs = [id, n](const bounds::Cell& cell, double C) {
      const double r = id == bounds::FamilyId::LinfMoment
                           ? std::numeric_limits<double>::infinity()
                           : cell.params.at("r");
      return bounds::lr_moment_rhs(cell.params.at("p"), n, r, C);
    };
    eval.in_envelope = [](const bounds::Cell&, double) { return true; };
    out.ledgers.emplace_back(bounds::family_name(id),
                             bounds::fit_constant(id, base_params(), std::move(cells), grid, eval));
  }

  for (CondPlan& plan : cond_plans) {
    const double pa_hat = static_cast<double>(plan.in_A) / static_cast<double>(total);
    std::vector<bounds::Cell> cells;
    if (plan.fc.id == bounds::FamilyId::Cond1) {
      std::size_t ordinal = 0;
      for (std::size_t ti = 0; ti < plan.fc.t_values.size(); ++ti) {
        const stats::MomentEstimate est =
            stats::bootstrap_mean(plan.rowvals[ti], conf, cfg.bootstrap_resamples,
                                  group_seed + 0x20000ULL * ++ordinal);
        bounds::Cell cell;
        cell.t = plan.fc.t_values[ti];
        cell.params["pA"] = pa_hat;
        cell.empirical = est.point;
        cell.ci_low = est.ci_low;
        cell.ci_high = est.ci_high;
        cell.count = total;
        cells.push_back(std::move(cell));
      }
      bounds::FamilyEval eval;
      eval.rhs = [n](const bounds::Cell& cell, double C) {
        return bounds::cond1_rhs(cell.params.at("pA"), cell.t, n, C);
      };
      eval.in_envelope = [](const bounds::Cell& cell, double C) {
        return bounds::cond_pA_in_envelope(cell.params.at("pA")) && cell.t >= C;
      };
      out.ledgers.emplace_back("Cond1",
                               bounds::fit_constant(bounds::FamilyId::Cond1,
                                                    base_params({{"a", plan.a}}), std::move(cells),
                                                    grid, eval));
    } else {
      for (std::size_t ti = 0; ti < plan.fc.t_values.size(); ++ti)
        for (double u : plan.fc.u) {
          const double cutoff = std::exp(-u) * pa_hat;
          long exceeding = 0;
          for (int j = 0; j < n; ++j) {
            const double p_joint =
                static_cast<double>(plan.coord_counts[ti][static_cast<std::size_t>(j)]) /
                static_cast<double>(total);
            exceeding += p_joint >= cutoff ? 1 : 0;
          }
          bounds::Cell cell;
          cell.t = plan.fc.t_values[ti];
          cell.params["u"] = u;
          cell.params["pA"] = pa_hat;
          cell.empirical = cell.ci_low = cell.ci_high = static_cast<double>(exceeding);
          cell.count = total;
          cells.push_back(std::move(cell));
        }
      bounds::FamilyEval eval;
      eval.rhs = [](const bounds::Cell& cell, double C) {
        return bounds::cond2_count_rhs(cell.params.at("pA"), cell.t, cell.params.at("u"), C);
      };
      eval.in_envelope = [](const bounds::Cell& cell, double C) {
        const double u = cell.params.at("u");
        return bounds::cond_pA_in_envelope(cell.params.at("pA")) && u >= 1.0 &&
               u <= cell.t / C;
      };
      out.ledgers.emplace_back("Cond2",
                               bounds::fit_constant(bounds::FamilyId::Cond2,
                                                    base_params({{"a", plan.a}}), std::move(cells),
                                                    grid, eval));
    }
  }

  for (const FamilyConfig& fc : estn_plans) {
    std::vector<bounds::Cell> cells;
    for (double p : fc.p) {
      bounds::Cell cell;
      cell.params["p"] = p;
      cells.push_back(std::move(cell));
    }
    bounds::FamilyEval eval;
    eval.refresh = [n](bounds::Cell& cell, double C) {
      const double p = cell.params.at("p");
      const bounds::EstNEnvelope env = bounds::envelope_threshold_estN(n, p, C);
      cell.t = env.t_star;
      cell.params["env_ok"] =
          env.status == bounds::EstNEnvelope::Status::not_converged ? 0.0 : 1.0;
      const double q = dist::exponential_upper_tail_exact(env.t_star);
      const double moment = dist::binomial_moment(n, q, static_cast<int>(p));
      cell.empirical = cell.ci_low = cell.ci_high =
          std::pow(env.t_star, 2.0 * p) * moment;
      cell.count = 0;
    };
    eval.rhs = [](const bounds::Cell& cell, double C) {
      return bounds::estN_rhs(cell.params.at("p"), C);
    };
    eval.in_envelope = [](const bounds::Cell& cell, double) {
      return cell.params.at("env_ok") > 0.5;
    };
    out.ledgers.emplace_back("EstNMoment",
                             bounds::fit_constant(bounds::FamilyId::EstNMoment,
                                                  base_params({{"oracle", 1.0}}), std::move(cells),
                                                  grid, eval));
  }

  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> violations;
  if (schema != 1) violations.push_back("schema: expected 1");
  if (!seed_set) violations.push_back("seed: mandatory, no wall-clock default");
  if (sample_count < 1) violations.push_back("sample_count: must be >= 1");
  if (!smoke && sample_count < 1000)
    violations.push_back("sample_count: must be >= 1000 unless the smoke flag is set");
  if (!(confidence > 0.0 && confidence < 1.0))
    violations.push_back("confidence: must lie in (0,1)");
  if (bootstrap_resamples < 1) violations.push_back("bootstrap_resamples: must be >= 1");
  if (distributions.empty()) violations.push_back("distributions: must be nonempty");
  if (families.empty()) violations.push_back("families: must be nonempty");
  for (std::size_t i = 1; i < constant_search_grid.size(); ++i)
    if (!(constant_search_grid[i] > constant_search_grid[i - 1])) {
      violations.push_back("constant_search_grid: must be strictly increasing");
      break;
    }
  if (!constant_search_grid.empty() && constant_search_grid.front() <= 0.0)
    violations.push_back("constant_search_grid: must be positive");

  for (std::size_t f = 0; f < families.size(); ++f) {
    const FamilyConfig& fc = families[f];
    const std::string where = "families[" + std::to_string(f) + "] (" +
                              bounds::family_name(fc.id) + "): ";
    const auto grid_check = [&](const std::vector<double>& grid, const char* name,
                                auto predicate, const char* requirement) {
      for (double value : grid)
        if (!predicate(value)) {
          violations.push_back(where + std::string(name) + " " + requirement);
          break;
        }
    };
    using bounds::FamilyId;
    if (fc.id == FamilyId::LrTailSmall || fc.id == FamilyId::LrMomentSmall)
      grid_check(fc.r, "r", [](double r) { return r >= 1.0 && r <= 2.0; }, "must lie in [1,2]");
    if (fc.id == FamilyId::LrTailLarge || fc.id == FamilyId::LrMomentLarge)
      grid_check(fc.r, "r", [](double r) { return r >= 2.0; }, "must be >= 2");
    if (fc.id == FamilyId::EstLarger)
      grid_check(fc.r, "r", [](double r) { return r > 2.0; }, "must be > 2");
    if (fc.id == FamilyId::LrMomentSmall || fc.id == FamilyId::LrMomentLarge ||
        fc.id == FamilyId::LinfMoment)
      grid_check(fc.p, "p", [](double p) { return p >= 2.0; }, "must be >= 2");
    if (fc.id == FamilyId::EstNMoment) {
      grid_check(fc.p, "p", [](double p) { return p >= 1.0; }, "must be >= 1");
      if (!fc.mode.empty() && fc.mode != "oracle")
        violations.push_back(where + "only oracle mode is supported");
    }
    if (fc.id == FamilyId::Cond1 || fc.id == FamilyId::Cond2) {
      if (!(fc.pA > 0.0 && fc.pA <= kInvE))
        violations.push_back(where + "pA must lie in (0, 1/e]");
      grid_check(fc.u, "u", [](double u) { return u >= 1.0; }, "must be >= 1");
    }
    for (long k : fc.k)
      if (k < 1) {
        violations.push_back(where + "k must be positive");
        break;
      }
    grid_check(fc.t_multipliers, "t_multipliers", [](double m) { return m > 0.0; },
               "must be positive");
    grid_check(fc.t_values, "t", [](double t) { return t > 0.0; }, "must be positive");
  }

  if (!violations.empty()) {
    std::string message = "invalid experiment config:";
    for (const std::string& violation : violations) message += "\n  - " + violation;
    throw std::invalid_argument(message);
  }
}

namespace {

ordered_json family_to_json(const FamilyConfig& fc) {
  ordered_json j;
  j["id"] = bounds::family_name(fc.id);
  if (!fc.k.empty()) j["k"] = fc.k;
  if (!fc.t_multipliers.empty()) j["t_multipliers"] = fc.t_multipliers;
  if (!fc.t_values.empty()) j["t"] = fc.t_values;
  if (!fc.r.empty()) j["r"] = fc.r;
  if (!fc.p.empty()) j["p"] = fc.p;
  if (!fc.u.empty()) j["u"] = fc.u;
  j["pA"] = fc.pA;
  if (!fc.mode.empty()) j["mode"] = fc.mode;
  return j;
}

FamilyConfig family_from_json(const json& j) {
  FamilyConfig fc;
  fc.id = bounds::family_from_name(j.at("id").get<std::string>());
  const auto grab = [&](const char* key, auto& target) {
    if (j.contains(key)) {
      target = j.at(key).get<std::decay_t<decltype(target)>>();
      if (target.empty())
        throw std::invalid_argument(std::string("family grid '") + key + "' is empty");
    }
  };
  grab("k", fc.k);
  grab("t_multipliers", fc.t_multipliers);
  grab("t", fc.t_values);
  grab("r", fc.r);
  grab("p", fc.p);
  grab("u", fc.u);
  if (j.contains("pA")) fc.pA = j.at("pA").get<double>();
  if (j.contains("mode")) fc.mode = j.at("mode").get<std::string>();
  return fc;
}

}  // namespace

std::string ExperimentConfig::canonical_json() const {
  // Plain json sorts keys; doubles round-trip via shortest representation.
  json j;
  j["schema"] = schema;
  j["seed"] = seed;
  j["sample_count"] = sample_count;
  j["confidence"] = confidence;
  j["smoke"] = smoke;
  j["bootstrap_resamples"] = bootstrap_resamples;
  j["constant_search_grid"] = constant_search_grid;
  auto dists = json::array();
  for (const auto& spec : distributions) dists.push_back(json::parse(dist::spec_to_json(spec)));
  j["distributions"] = dists;
  auto fams = json::array();
  for (const auto& fc : families) fams.push_back(json(family_to_json(fc)));
  j["families"] = fams;
  return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a(canonical_json()); }

ExperimentConfig config_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  ExperimentConfig cfg;
  if (j.contains("schema")) cfg.schema = j.at("schema").get<int>();
  if (j.contains("seed")) {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.seed_set = true;
  }
  if (j.contains("sample_count")) cfg.sample_count = j.at("sample_count").get<long>();
  if (j.contains("confidence")) cfg.confidence = j.at("confidence").get<double>();
  if (j.contains("smoke")) cfg.smoke = j.at("smoke").get<bool>();
  if (j.contains("bootstrap_resamples"))
    cfg.bootstrap_resamples = j.at("bootstrap_resamples").get<int>();
  if (j.contains("constant_search_grid"))
    cfg.constant_search_grid = j.at("constant_search_grid").get<std::vector<double>>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("distributions"))
    for (const auto& d : j.at("distributions"))
      cfg.distributions.push_back(dist::spec_from_json(d.dump()));
  if (j.contains("families"))
    for (const auto& f : j.at("families")) cfg.families.push_back(family_from_json(f));
  return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("io error: cannot read config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

std::string default_output_dir() {
  const char* env = std::getenv("LCLAB_OUTPUT_DIR");
  return env && *env ? env : "lclab-out";
}

const char* code_version() { return "lclab 0.1.0"; }

RunReport run_experiment(const ExperimentConfig& config, int workers) {
  config.validate();
  const std::string out_dir =
      config.output_dir.empty() ? default_output_dir() : config.output_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("io error: cannot create output dir " + out_dir);

  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));

  RunReport report;
  report.config_hash = config.config_hash();

  ordered_json run_json;
  run_json["schema"] = 1;
  run_json["config_hash"] = hash_hex;
  run_json["code_version"] = code_version();
  run_json["timestamp"] = static_cast<long>(std::time(nullptr));
  auto diagnostics = ordered_json::array();
  auto skipped = ordered_json::array();
  auto ledger_files = ordered_json::array();

  for (const dist::DistributionSpec& spec : config.distributions) {
    GroupLedgers group = run_group(config, spec, workers);
    diagnostics.push_back(group.diagnostics);
    for (const std::string& note : group.skipped) skipped.push_back(note);

    const std::string label = spec.label();
    for (auto& [family, ledger] : group.ledgers) {
      LedgerFile lf;
      lf.distribution = label;
      lf.ledger = std::move(ledger);
      const std::string stem = family + "__" + label;
      lf.json_path = (fs::path(out_dir) / (stem + ".json")).string();
      lf.csv_path = (fs::path(out_dir) / (stem + ".csv")).string();

      ordered_json ledger_json = ordered_json::parse(bounds::ledger_to_json(lf.ledger));
      ledger_json["distribution"] = label;
      ledger_json["config_hash"] = hash_hex;
      write_file_atomic(lf.json_path, ledger_json.dump(2) + "\n");
      write_file_atomic(lf.csv_path, bounds::ledger_to_csv(lf.ledger));

      report.all_qualified = report.all_qualified && lf.ledger.qualified;
      ledger_files.push_back(stem + ".json");
      report.ledgers.push_back(std::move(lf));
    }
  }

  run_json["ledgers"] = ledger_files;
  run_json["diagnostics"] = diagnostics;
  run_json["skipped"] = skipped;
  run_json["all_qualified"] = report.all_qualified;
  report.report_path = (fs::path(out_dir) / "run_report.json").string();
  write_file_atomic(report.report_path, run_json.dump(2) + "\n");
  return report;
}

void render_report(const std::string& run_dir) {
  std::vector<std::string> ledger_paths;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".json") && name != "run_report.json" && !name.starts_with("plot__"))
      ledger_paths.push_back(entry.path().string());
  }
  std::sort(ledger_paths.begin(), ledger_paths.end());
  if (ledger_paths.empty())
    throw std::runtime_error("io error: no ledger files under " + run_dir);

  std::string summary =
      "family                distribution                fitted_C   qualified  cells(in-env/pass/total)\n";
  for (const std::string& path : ledger_paths) {
    std::ifstream in(path);
    json j = json::parse(in);
    const std::string family = j.at("family").get<std::string>();
    const std::string distribution = j.value("distribution", std::string("?"));
    long in_env = 0, passed = 0, cell_count = 0;
    std::string plot = "t,k,r,p,u,empirical,ci_high,rhs,in_envelope\n";
    for (const auto& cell : j.at("cells")) {
      ++cell_count;
      if (cell.value("in_envelope", false)) ++in_env;
      if (cell.value("pass", false)) ++passed;
      char line[256];
      std::snprintf(line, sizeof(line), "%.17g,%g,%g,%g,%g,%.17g,%.17g,%.17g,%d\n",
                    cell.value("t", 0.0), cell.value("k", 0.0), cell.value("r", 0.0),
                    cell.value("p", 0.0), cell.value("u", 0.0), cell.value("empirical", 0.0),
                    cell.value("ci_high", 0.0), cell.value("rhs", 0.0),
                    cell.value("in_envelope", false) ? 1 : 0);
      plot += line;
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s  %-26s  %9.4f  %-9s  %ld/%ld/%ld\n", family.c_str(),
                  distribution.c_str(), j.at("fitted_C").get<double>(),
                  j.at("qualified").get<bool>() ? "yes" : "NO", in_env, passed, cell_count);
    summary += line;

    const std::string stem = fs::path(path).stem().string();
    write_file_atomic((fs::path(run_dir) / ("plot__" + stem + ".csv")).string(), plot);
  }
  write_file_atomic((fs::path(run_dir) / "summary.txt").string(), summary);
}

}  // namespace lclab::harness
