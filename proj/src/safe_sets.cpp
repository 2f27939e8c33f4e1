#include "safecover/safe_sets.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace safecover {

namespace {

// A base location with a negative score certifies nothing (d >= 0), so the
// scan keeps only useful certifiers, strongest first for early exit. Each
// carries a conservative reach box in cell units: candidates outside it can
// never pass the exact test, so the expensive distance goes unevaluated.
struct Certifier {
  Loc loc;
  double score;
  int row, col;
  int reach_cells;
};

std::vector<Certifier> useful_certifiers(const GridDomain& domain, const LocList& base,
                                         const std::vector<double>& scores, double lipschitz) {
  std::vector<Certifier> cs;
  cs.reserve(base.size());
  for (size_t i = 0; i < base.size(); ++i) {
    if (scores[i] < 0.0) continue;
    Certifier c;
    c.loc = base[i];
    c.score = scores[i];
    c.row = domain.row(base[i]);
    c.col = domain.col(base[i]);
    c.reach_cells = static_cast<int>(std::ceil(scores[i] / (lipschitz * domain.spacing))) + 1;
    cs.push_back(c);
  }
  std::stable_sort(cs.begin(), cs.end(),
                   [](const Certifier& a, const Certifier& b) { return a.score > b.score; });
  return cs;
}

bool certified(const GridDomain& domain, const std::vector<Certifier>& cs, Loc v,
               double lipschitz) {
  const int row = domain.row(v);
  const int col = domain.col(v);
  for (const Certifier& c : cs) {
    if (std::abs(row - c.row) > c.reach_cells || std::abs(col - c.col) > c.reach_cells) continue;
    if (c.score - lipschitz * domain.distance(v, c.loc) >= 0.0) return true;
  }
  return false;
}

}  // namespace

std::vector<std::uint8_t> certified_mask_serial(const GridDomain& domain, const LocList& base,
                                                const std::vector<double>& base_scores,
                                                double lipschitz) {
  const auto cs = useful_certifiers(domain, base, base_scores, lipschitz);
  std::vector<std::uint8_t> mask(domain.size(), 0);
  for (Loc v = 0; v < domain.size(); ++v) mask[v] = certified(domain, cs, v, lipschitz) ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> certified_mask_parallel(const GridDomain& domain, const LocList& base,
                                                  const std::vector<double>& base_scores,
                                                  double lipschitz) {
  const auto cs = useful_certifiers(domain, base, base_scores, lipschitz);
  std::vector<std::uint8_t> mask(domain.size(), 0);
#pragma omp parallel for schedule(static)
  for (Loc v = 0; v < domain.size(); ++v) mask[v] = certified(domain, cs, v, lipschitz) ? 1 : 0;
  return mask;
}

namespace {

std::vector<std::uint8_t> certified_mask(const GridDomain& domain, const LocList& base,
                                         const std::vector<double>& scores, double lipschitz,
                                         Exec exec) {
  return exec == Exec::parallel ? certified_mask_parallel(domain, base, scores, lipschitz)
                                : certified_mask_serial(domain, base, scores, lipschitz);
}

std::vector<double> operator_scores(const ConfidenceBounds& bounds_q, const LocList& base,
                                    OperatorKind kind, double eps_q) {
  std::vector<double> scores(base.size());
  for (size_t i = 0; i < base.size(); ++i)
    scores[i] = kind == OperatorKind::pessimistic ? bounds_q.lower[base[i]]
                                                  : bounds_q.upper[base[i]] - eps_q;
  return scores;
}

// Shared fixed-point loop: expand the seed through repeatedly certified and
// connected territory. score_of(z) supplies the Lipschitz budget at z. The
// certified mask accumulates incrementally: each pass only stamps the reach
// of the members added in the previous pass.
template <class ScoreFn>
LocList lipschitz_reach_fixpoint(const GridDomain& domain, const LocList& seed,
                                 ScoreFn&& score_of, double lipschitz, Exec exec) {
  (void)exec;  // the incremental stamps are cheap enough to run serially
  std::vector<std::uint8_t> certified(domain.size(), 0);
  std::vector<std::uint8_t> in_set(domain.size(), 0);
  LocList current = seed;
  for (Loc v : seed) in_set[v] = 1;
  LocList fresh = seed;

  for (int iter = 0; iter <= domain.size(); ++iter) {
    // Stamp the certification balls of the newly added members.
    for (Loc z : fresh) {
      const double score = score_of(z);
      if (score < 0.0) continue;
      const int reach = static_cast<int>(std::ceil(score / (lipschitz * domain.spacing))) + 1;
      const int zr = domain.row(z), zc = domain.col(z);
      const int r0 = std::max(0, zr - reach), r1 = std::min(domain.height - 1, zr + reach);
      const int c0 = std::max(0, zc - reach), c1 = std::min(domain.width - 1, zc + reach);
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
          const Loc v = domain.at(r, c);
          if (!certified[v] && score - lipschitz * domain.distance(v, z) >= 0.0) certified[v] = 1;
        }
    }

    // Grow the component of the current set inside (certified u set).
    std::deque<Loc> queue(current.begin(), current.end());
    LocList added;
    while (!queue.empty()) {
      const Loc v = queue.front();
      queue.pop_front();
      Loc nb[4];
      const int n = domain.neighbors(v, nb);
      for (int k = 0; k < n; ++k) {
        const Loc w = nb[k];
        if (!in_set[w] && certified[w]) {
          in_set[w] = 1;
          added.push_back(w);
          queue.push_back(w);
        }
      }
    }
    if (added.empty()) {
      std::sort(current.begin(), current.end());
      return current;
    }
    current.insert(current.end(), added.begin(), added.end());
    fresh = std::move(added);
  }
  throw std::logic_error("lipschitz_reach_fixpoint: did not converge within |V| iterations");
}

}  // namespace

LocList pessimistic_operator(const ConfidenceBounds& bounds_q, const GridDomain& domain,
                             const LocList& base, const SafetyParams& params) {
  const auto scores = operator_scores(bounds_q, base, OperatorKind::pessimistic, params.eps_q);
  return mask_to_list(certified_mask(domain, base, scores, params.lipschitz, default_exec()));
}

LocList optimistic_operator(const ConfidenceBounds& bounds_q, const GridDomain& domain,
                            const LocList& base, const SafetyParams& params) {
  const auto scores = operator_scores(bounds_q, base, OperatorKind::optimistic, params.eps_q);
  return mask_to_list(certified_mask(domain, base, scores, params.lipschitz, default_exec()));
}

LocList ergodic_expand(OperatorKind kind, const ConfidenceBounds& bounds_q,
                       const GridDomain& domain, const LocList& seed, const SafetyParams& params,
                       Exec exec) {
  if (seed.empty()) throw std::invalid_argument("ergodic_expand: empty seed");
  params.validate();
  const double eps = kind == OperatorKind::optimistic ? params.eps_q : 0.0;
  auto score_of = [&](Loc z) {
    return kind == OperatorKind::pessimistic ? bounds_q.lower[z] : bounds_q.upper[z] - eps;
  };
  return lipschitz_reach_fixpoint(domain, seed, score_of, params.lipschitz, exec);
}

LocList true_reachable_set(const std::vector<double>& truth_q, const GridDomain& domain,
                           const LocList& seed, double eps, double lipschitz, Exec exec) {
  if (seed.empty()) throw std::invalid_argument("true_reachable_set: empty seed");
  for (Loc v : seed)
    if (truth_q[v] < 0.0)
      throw std::invalid_argument("true_reachable_set: seed violates q >= 0");
  auto score_of = [&](Loc z) { return truth_q[z] - eps; };
  return lipschitz_reach_fixpoint(domain, seed, score_of, lipschitz, exec);
}

SafeSetState initial_safe_state(const GridDomain& domain, const std::vector<Loc>& seeds) {
  SafeSetState s;
  s.seeds = seeds;
  LocList all(domain.size());
  std::iota(all.begin(), all.end(), 0);
  for (Loc seed : seeds) {
    if (!domain.valid(seed)) throw std::invalid_argument("initial_safe_state: seed out of domain");
    s.pessimistic.push_back({seed});
    s.optimistic.push_back(all);
    s.unions.push_back(all);
  }
  return s;
}

SafeSetState update_safe_sets(const SafeSetState& state, const ConfidenceBounds& bounds_q,
                              const GridDomain& domain, const SafetyParams& params, Exec exec) {
  SafeSetState next;
  next.seeds = state.seeds;
  for (int i = 0; i < state.n_agents(); ++i) {
    LocList pess =
        ergodic_expand(OperatorKind::pessimistic, bounds_q, domain, state.pessimistic[i], params, exec);
    LocList opti =
        ergodic_expand(OperatorKind::optimistic, bounds_q, domain, state.pessimistic[i], params, exec);
    next.unions.push_back(set_union(pess, opti));
    next.pessimistic.push_back(std::move(pess));
    next.optimistic.push_back(std::move(opti));
  }
  return next;
}

BatchCollection group_by_intersection(const std::vector<LocList>& per_agent_sets) {
  const int n = static_cast<int>(per_agent_sets.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!set_intersection(per_agent_sets[i], per_agent_sets[j]).empty()) {
        const int ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }

  BatchCollection out;
  std::vector<int> batch_of(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = find(i);
    if (batch_of[root] < 0) {
      batch_of[root] = static_cast<int>(out.batches.size());
      out.batches.emplace_back();
      out.merged_sets.emplace_back();
    }
    const int b = batch_of[root];
    out.batches[b].push_back(i);
    out.merged_sets[b] = set_union(out.merged_sets[b], per_agent_sets[i]);
  }
  return out;
}

BatchCollection compute_batches(const SafeSetState& state) {
  return group_by_intersection(state.unions);
}

BatchCollection compute_batches_pessimistic(const SafeSetState& state) {
  return group_by_intersection(state.pessimistic);
}

}  // namespace safecover
