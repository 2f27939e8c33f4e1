#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace safecover {

// Location index into a grid domain, row-major: v = row * width + col.
using Loc = std::int32_t;

// Sorted, duplicate-free list of locations. All set-valued results use this
// representation so iteration order is deterministic.
using LocList = std::vector<Loc>;

bool contains(const LocList& sorted, Loc v);
LocList set_union(const LocList& a, const LocList& b);
LocList set_intersection(const LocList& a, const LocList& b);
LocList set_difference(const LocList& a, const LocList& b);
bool is_subset(const LocList& a, const LocList& b);

// 4-connected rectangular grid with physical cell spacing. Locations map to
// coordinates (col * spacing, row * spacing).
struct GridDomain {
  int width = 0;
  int height = 0;
  double spacing = 1.0;

  int size() const { return width * height; }
  int row(Loc v) const { return v / width; }
  int col(Loc v) const { return v % width; }
  Loc at(int r, int c) const { return static_cast<Loc>(r * width + c); }
  bool valid(Loc v) const { return v >= 0 && v < size(); }
  double x(Loc v) const { return col(v) * spacing; }
  double y(Loc v) const { return row(v) * spacing; }

  // Euclidean distance between cell centers.
  double distance(Loc a, Loc b) const;

  // Writes the 2-4 adjacent locations of v into out, returns the count.
  int neighbors(Loc v, Loc out[4]) const;
};

// Everything within n adjacency steps of the seed set. An empty seed yields
// an empty set. With a restriction the search never leaves it (paths may not
// tunnel through excluded cells); seeds outside the restriction are dropped.
LocList n_step_reach(const GridDomain& domain, const LocList& seed, int n,
                     const std::optional<LocList>& restrict_to = std::nullopt);

// Connected-component closure of the seed set, the fixed point of
// n_step_reach as n grows.
LocList reach_closure(const GridDomain& domain, const LocList& seed,
                      const std::optional<LocList>& restrict_to = std::nullopt);

struct Disk {
  Loc center = 0;
  LocList members;
};

// The r-step reachable neighborhood of center. When a restriction is given,
// center must lie in it and BFS stays inside it.
Disk disk(const GridDomain& domain, Loc center, int r,
          const std::optional<LocList>& restrict_to = std::nullopt);

// Mask helpers shared by the set-heavy modules.
std::vector<std::uint8_t> make_mask(int domain_size, const LocList& members);
LocList mask_to_list(const std::vector<std::uint8_t>& mask);

}  // namespace safecover
