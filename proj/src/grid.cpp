#include "safecover/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "safecover/exec.hpp"

namespace safecover {

namespace {
Exec g_default_exec = Exec::parallel;
}

Exec default_exec() { return g_default_exec; }
void set_default_exec(Exec mode) { g_default_exec = mode; }

bool contains(const LocList& sorted, Loc v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

LocList set_union(const LocList& a, const LocList& b) {
  LocList out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

LocList set_intersection(const LocList& a, const LocList& b) {
  LocList out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

LocList set_difference(const LocList& a, const LocList& b) {
  LocList out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool is_subset(const LocList& a, const LocList& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

double GridDomain::distance(Loc a, Loc b) const {
  const double dx = x(a) - x(b);
  const double dy = y(a) - y(b);
  return std::sqrt(dx * dx + dy * dy);
}

int GridDomain::neighbors(Loc v, Loc out[4]) const {
  const int r = row(v);
  const int c = col(v);
  int n = 0;
  if (r > 0) out[n++] = v - width;
  if (r + 1 < height) out[n++] = v + width;
  if (c > 0) out[n++] = v - 1;
  if (c + 1 < width) out[n++] = v + 1;
  return n;
}

namespace {

// Breadth-first search from seed, optionally capped at max_steps and
// restricted to a mask. Returns the visited set, sorted.
LocList bfs(const GridDomain& domain, const LocList& seed, long max_steps,
            const std::vector<std::uint8_t>* restrict_mask) {
  std::vector<std::int32_t> depth(domain.size(), -1);
  std::deque<Loc> queue;
  for (Loc v : seed) {
    if (!domain.valid(v)) throw std::invalid_argument("bfs: seed location out of domain");
    if (restrict_mask && !(*restrict_mask)[v]) continue;
    if (depth[v] < 0) {
      depth[v] = 0;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const Loc v = queue.front();
    queue.pop_front();
    if (depth[v] >= max_steps) continue;
    Loc nb[4];
    const int n = domain.neighbors(v, nb);
    for (int i = 0; i < n; ++i) {
      const Loc w = nb[i];
      if (depth[w] >= 0) continue;
      if (restrict_mask && !(*restrict_mask)[w]) continue;
      depth[w] = depth[v] + 1;
      queue.push_back(w);
    }
  }
  LocList out;
  for (Loc v = 0; v < domain.size(); ++v)
    if (depth[v] >= 0) out.push_back(v);
  return out;
}

}  // namespace

LocList n_step_reach(const GridDomain& domain, const LocList& seed, int n,
                     const std::optional<LocList>& restrict_to) {
  if (n < 0) throw std::invalid_argument("n_step_reach: n must be >= 0");
  if (seed.empty()) return {};
  if (restrict_to) {
    auto mask = make_mask(domain.size(), *restrict_to);
    return bfs(domain, seed, n, &mask);
  }
  return bfs(domain, seed, n, nullptr);
}

LocList reach_closure(const GridDomain& domain, const LocList& seed,
                      const std::optional<LocList>& restrict_to) {
  if (seed.empty()) return {};
  if (restrict_to) {
    auto mask = make_mask(domain.size(), *restrict_to);
    return bfs(domain, seed, domain.size(), &mask);
  }
  return bfs(domain, seed, domain.size(), nullptr);
}

Disk disk(const GridDomain& domain, Loc center, int r,
          const std::optional<LocList>& restrict_to) {
  if (!domain.valid(center)) throw std::invalid_argument("disk: center out of domain");
  if (restrict_to && !contains(*restrict_to, center))
    throw std::invalid_argument("disk: center not inside the restriction set");
  Disk d;
  d.center = center;
  d.members = n_step_reach(domain, {center}, r, restrict_to);
  return d;
}

std::vector<std::uint8_t> make_mask(int domain_size, const LocList& members) {
  std::vector<std::uint8_t> mask(domain_size, 0);
  for (Loc v : members) mask[v] = 1;
  return mask;
}

LocList mask_to_list(const std::vector<std::uint8_t>& mask) {
  LocList out;
  for (Loc v = 0; v < static_cast<Loc>(mask.size()); ++v)
    if (mask[v]) out.push_back(v);
  return out;
}

}  // namespace safecover
