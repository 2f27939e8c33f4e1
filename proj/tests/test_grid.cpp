#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <queue>
#include <set>

#include "safecover/grid.hpp"
#include "safecover/rng.hpp"

using namespace safecover;

namespace {

// Independent reference BFS used as the oracle: plain queue over an explicit
// neighbor table, no shared code with the implementation path.
std::set<Loc> oracle_reach(const GridDomain& d, const std::set<Loc>& seed, int max_steps,
                           const std::set<Loc>* restrict_to = nullptr) {
  std::set<Loc> visited;
  std::queue<std::pair<Loc, int>> q;
  for (Loc s : seed) {
    if (restrict_to && !restrict_to->count(s)) continue;
    if (visited.insert(s).second) q.push({s, 0});
  }
  while (!q.empty()) {
    auto [v, depth] = q.front();
    q.pop();
    if (depth == max_steps) continue;
    const int row = v / d.width, col = v % d.width;
    const Loc candidates[4] = {v - d.width, v + d.width, v - 1, v + 1};
    const bool ok[4] = {row > 0, row + 1 < d.height, col > 0, col + 1 < d.width};
    for (int i = 0; i < 4; ++i) {
      if (!ok[i]) continue;
      if (restrict_to && !restrict_to->count(candidates[i])) continue;
      if (visited.insert(candidates[i]).second) q.push({candidates[i], depth + 1});
    }
  }
  return visited;
}

LocList to_list(const std::set<Loc>& s) { return LocList(s.begin(), s.end()); }

}  // namespace

TEST_CASE("n_step_reach basics") {
  const GridDomain five{5, 5, 1.0};
  const Loc center = five.at(2, 2);
  CHECK(n_step_reach(five, {center}, 0) == LocList{center});

  const GridDomain three{3, 3, 1.0};
  const Loc corner = three.at(0, 0);
  CHECK(n_step_reach(three, {corner}, 1).size() == 3);

  CHECK(n_step_reach(five, {}, 3).empty());
}

TEST_CASE("n_step_reach matches the oracle on the 30x30 grid") {
  const GridDomain d{30, 30, 0.1};
  const Loc center = d.at(15, 15);
  const auto got = n_step_reach(d, {center}, 5);
  CHECK(got.size() == 61);  // L1 ball of radius 5, unclipped
  CHECK(got == to_list(oracle_reach(d, {center}, 5)));
}

TEST_CASE("reach_closure components and idempotence") {
  const GridDomain d{6, 6, 1.0};
  CHECK(reach_closure(d, {7}).size() == 36);

  // Wall off a 2x2 pocket in the corner via a restriction set.
  std::set<Loc> pocket{d.at(0, 0), d.at(0, 1), d.at(1, 0), d.at(1, 1)};
  std::set<Loc> allowed = pocket;
  allowed.insert(d.at(4, 4));
  allowed.insert(d.at(4, 5));
  const LocList restrict_to = to_list(allowed);
  const auto got = reach_closure(d, {d.at(0, 0)}, restrict_to);
  CHECK(got == to_list(pocket));
  CHECK(got == to_list(oracle_reach(d, {d.at(0, 0)}, d.size(), &allowed)));

  CHECK(reach_closure(d, got, restrict_to) == got);
}

TEST_CASE("disk construction") {
  const GridDomain d{30, 30, 0.1};
  const Loc c = d.at(10, 10);
  CHECK(disk(d, c, 0).members == LocList{c});
  CHECK(disk(d, c, 5).members.size() == 61);

  // Restriction that strips all neighbors leaves the singleton.
  CHECK(disk(d, c, 5, LocList{c}).members == LocList{c});
  CHECK_THROWS_AS(disk(d, c, 2, LocList{c + 1}), std::invalid_argument);
}

TEST_CASE("distance basics") {
  const GridDomain d{10, 10, 0.1};
  CHECK(d.distance(5, 5) == 0.0);
  CHECK(d.distance(d.at(3, 3), d.at(3, 4)) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(d.distance(d.at(3, 3), d.at(4, 4)) ==
        doctest::Approx(0.1 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("reach monotonicity in seed and steps") {
  const GridDomain d{12, 9, 1.0};
  RngStream rng(42, "grid-mono");
  for (int rep = 0; rep < 50; ++rep) {
    std::set<Loc> small, large;
    const int base = 1 + static_cast<int>(rng.next_below(5));
    for (int i = 0; i < base; ++i) small.insert(static_cast<Loc>(rng.next_below(d.size())));
    large = small;
    for (int i = 0; i < 3; ++i) large.insert(static_cast<Loc>(rng.next_below(d.size())));
    const int n = static_cast<int>(rng.next_below(6));

    const auto from_small = n_step_reach(d, to_list(small), n);
    const auto from_large = n_step_reach(d, to_list(large), n);
    CHECK(is_subset(from_small, from_large));
    CHECK(is_subset(from_small, n_step_reach(d, to_list(small), n + 1)));
  }
}

TEST_CASE("disk nesting and size bound") {
  const GridDomain d{20, 20, 1.0};
  RngStream rng(43, "disk-prop");
  for (int rep = 0; rep < 40; ++rep) {
    const Loc c = static_cast<Loc>(rng.next_below(d.size()));
    const int r = static_cast<int>(rng.next_below(6));
    const auto inner = disk(d, c, r).members;
    const auto outer = disk(d, c, r + 1).members;
    CHECK(is_subset(inner, outer));
    CHECK(inner.size() <= static_cast<size_t>(2 * r * r + 2 * r + 1));
    CHECK(contains(inner, c));
  }
}

TEST_CASE("distance symmetry and triangle inequality") {
  const GridDomain d{15, 11, 0.25};
  RngStream rng(44, "dist-prop");
  for (int rep = 0; rep < 200; ++rep) {
    const Loc a = static_cast<Loc>(rng.next_below(d.size()));
    const Loc b = static_cast<Loc>(rng.next_below(d.size()));
    const Loc c = static_cast<Loc>(rng.next_below(d.size()));
    CHECK(d.distance(a, b) == doctest::Approx(d.distance(b, a)).epsilon(1e-15));
    CHECK(d.distance(a, c) <= d.distance(a, b) + d.distance(b, c) + 1e-12);
  }
}

TEST_CASE("reach_closure partitions the domain under a fixed restriction") {
  const GridDomain d{8, 8, 1.0};
  RngStream rng(45, "partition");
  std::set<Loc> allowed;
  for (Loc v = 0; v < d.size(); ++v)
    if (rng.next_double() < 0.7) allowed.insert(v);
  const LocList restrict_to = to_list(allowed);

  std::map<Loc, LocList> component;
  for (Loc v : restrict_to) component[v] = reach_closure(d, {v}, restrict_to);
  for (Loc v : restrict_to)
    for (Loc w : restrict_to) {
      const bool same = component[v] == component[w];
      const bool overlap = !set_intersection(component[v], component[w]).empty();
      CHECK(same == overlap);
    }
}

TEST_CASE("neighbors are symmetric with degree 2 to 4") {
  const GridDomain d{7, 5, 1.0};
  for (Loc v = 0; v < d.size(); ++v) {
    Loc nb[4];
    const int n = d.neighbors(v, nb);
    CHECK(n >= 2);
    CHECK(n <= 4);
    for (int i = 0; i < n; ++i) {
      Loc back[4];
      const int m = d.neighbors(nb[i], back);
      CHECK(std::find(back, back + m, v) != back + m);
    }
  }
}
