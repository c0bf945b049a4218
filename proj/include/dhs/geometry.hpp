#ifndef DHS_GEOMETRY_HPP_
#define DHS_GEOMETRY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dhs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/* Axis-aligned hyper-rectangle [lo, hi], lo <= hi elementwise. */
struct Box {
  Vec lo, hi;

  Box() = default;
  Box(Vec l, Vec h);
  static Box point(const Vec& p) { return Box(p, p); }

  int dim() const { return (int)lo.size(); }
  Vec center() const { return 0.5 * (lo + hi); }
  Vec radius() const { return 0.5 * (hi - lo); }  // cell "diameter rho" convention
  bool empty_as_set() const { return lo.size() == 0; }

  bool contains(const Vec& p, double tol = 0.0) const;
  bool contains_box(const Box& b, double tol = 0.0) const;
  bool intersects(const Box& b) const;
  std::optional<Box> intersection(const Box& b) const;
  Box hull(const Box& b) const;

  /* sup over the box of |p - c|_inf */
  double sup_norm_around(const Vec& c) const;
};

/* Grows each face outward by lambda >= 0 (per axis). */
Box inflate(const Box& b, const Vec& lambda);

/* Infinity-norm ball. The paper's balls sit at the origin; modes whose
 * equilibrium is away from 0 carry the center explicitly. */
struct Ball {
  Vec center;
  double radius = 0.0;

  Ball() = default;
  Ball(Vec c, double r);

  bool contains(const Vec& p, double tol = 0.0) const;
  bool contains_box(const Box& b, double tol = 0.0) const;
  Box bounding_box() const;
};

/* Uniform half-open tiling of a bounded domain with cell pitch 2*rho,
 * aligned at domain.lo. Trailing partial cells are full-size (overhang
 * outward), so the tiled region always covers the domain. */
class MasterGrid {
 public:
  MasterGrid() = default;
  MasterGrid(Box domain, Vec rho);

  int dim() const { return (int)rho_.size(); }
  const Box& domain() const { return domain_; }
  const Vec& rho() const { return rho_; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t cell_count() const { return total_; }

  std::size_t index_of(const std::vector<int>& multi) const;
  std::vector<int> multi_of(std::size_t index) const;
  Box cell_box(std::size_t index) const;

  /* Cell owning point p; boundary points belong to the lower-index cell
   * via the half-open tiling. nullopt when p is outside the tiled region. */
  std::optional<std::size_t> locate(const Vec& p) const;

  /* Closed index span of cells whose interior meets b (clamped to range);
   * nullopt when b misses the tiled region entirely. */
  std::optional<std::pair<std::vector<int>, std::vector<int>>> index_span(const Box& b) const;

  bool same_layout(const MasterGrid& o) const;

 private:
  Box domain_;
  Vec rho_;
  std::vector<int> shape_;
  std::vector<std::size_t> stride_;
  std::size_t total_ = 0;
};

/* Occupancy bitset over a MasterGrid. */
class CellGrid {
 public:
  CellGrid() = default;
  explicit CellGrid(const MasterGrid* grid);

  const MasterGrid& grid() const { return *grid_; }
  bool empty() const { return popcount_ == 0; }
  std::size_t size() const { return popcount_; }

  bool test(std::size_t index) const;
  void set(std::size_t index);
  void clear();

  CellGrid& operator|=(const CellGrid& o);
  CellGrid& operator&=(const CellGrid& o);
  bool operator==(const CellGrid& o) const;
  bool is_subset_of(const CellGrid& o) const;

  /* Marks every cell meeting b (outward rasterization). */
  void mark_box(const Box& b);
  /* Marks only cells fully inside b. */
  void mark_box_inner(const Box& b, double tol = 0.0);

  bool contains_point(const Vec& p) const;
  /* True iff b is covered by occupied cells. */
  bool contains_box(const Box& b) const;
  /* True iff some occupied cell meets b. */
  bool intersects_box(const Box& b) const;

  /* Occupancy dilated by k cells per axis (Chebyshev), clamped to range. */
  CellGrid dilated(const std::vector<int>& k_per_axis) const;

  std::vector<std::size_t> occupied() const;  // ascending
  Box bounding_box() const;                   // hull of occupied cells; empty() must be false

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t wi = 0; wi < words_.size(); ++wi) {
      std::uint64_t w = words_[wi];
      while (w) {
        const int b = __builtin_ctzll(w);
        f(wi * 64 + (std::size_t)b);
        w &= w - 1;
      }
    }
  }

 private:
  const MasterGrid* grid_ = nullptr;
  std::vector<std::uint64_t> words_;
  std::size_t popcount_ = 0;
};

/* Canonical cover of a region with cells of radius rho, aligned to
 * region.lo. Returns the grid and fully-occupied cell set. */
struct Cover {
  MasterGrid grid;
  CellGrid cells;
};
Cover cover(const Box& region, const Vec& rho);

/* Region represented as occupied cells plus an analytic ball clipped to a
 * box; the invariant sets P(q) ∪ (B(r1+eps) ∩ S_q) live here. */
struct GridRegion {
  CellGrid cells;
  bool has_ball = false;
  Ball ball;
  Box ball_clip;  // ball contributes ball ∩ ball_clip

  bool contains_point(const Vec& p, double tol = 0.0) const;
  /* Membership with slack: p lies within `tol` of the region. */
  bool contains_point_within(const Vec& p, double tol) const;
  bool contains_box(const Box& b) const;
  bool empty() const;
  Box bounding_box() const;
};

}  // namespace dhs

#endif
