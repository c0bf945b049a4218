#include "dhs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dhs {

Box::Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
  if (lo.size() != hi.size()) throw std::invalid_argument("box: dimension mismatch");
  for (int i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i])) throw std::invalid_argument("box: lo > hi on axis " + std::to_string(i));
}

bool Box::contains(const Vec& p, double tol) const {
  if (p.size() != lo.size()) throw std::invalid_argument("box.contains: dimension mismatch");
  for (int i = 0; i < lo.size(); ++i)
    if (p[i] < lo[i] - tol || p[i] > hi[i] + tol) return false;
  return true;
}

bool Box::contains_box(const Box& b, double tol) const {
  if (b.dim() != dim()) throw std::invalid_argument("box.contains_box: dimension mismatch");
  for (int i = 0; i < lo.size(); ++i)
    if (b.lo[i] < lo[i] - tol || b.hi[i] > hi[i] + tol) return false;
  return true;
}

bool Box::intersects(const Box& b) const {
  for (int i = 0; i < lo.size(); ++i)
    if (b.hi[i] < lo[i] || b.lo[i] > hi[i]) return false;
  return true;
}

std::optional<Box> Box::intersection(const Box& b) const {
  Vec l = lo.cwiseMax(b.lo), h = hi.cwiseMin(b.hi);
  for (int i = 0; i < l.size(); ++i)
    if (l[i] > h[i]) return std::nullopt;
  return Box(l, h);
}

Box Box::hull(const Box& b) const { return Box(lo.cwiseMin(b.lo), hi.cwiseMax(b.hi)); }

double Box::sup_norm_around(const Vec& c) const {
  double m = 0.0;
  for (int i = 0; i < lo.size(); ++i)
    m = std::max(m, std::max(std::fabs(lo[i] - c[i]), std::fabs(hi[i] - c[i])));
  return m;
}

Box inflate(const Box& b, const Vec& lambda) {
  if (lambda.size() != b.lo.size()) throw std::invalid_argument("inflate: dimension mismatch");
  for (int i = 0; i < lambda.size(); ++i)
    if (lambda[i] < 0.0) throw std::invalid_argument("inflate: negative lambda");
  return Box(b.lo - lambda, b.hi + lambda);
}

Ball::Ball(Vec c, double r) : center(std::move(c)), radius(r) {
  if (!(r > 0.0)) throw std::invalid_argument("ball: radius must be positive");
}

bool Ball::contains(const Vec& p, double tol) const {
  return (p - center).lpNorm<Eigen::Infinity>() <= radius + tol;
}

bool Ball::contains_box(const Box& b, double tol) const {
  // farthest corner per axis suffices for the inf-norm
  for (int i = 0; i < b.dim(); ++i) {
    const double d = std::max(std::fabs(b.lo[i] - center[i]), std::fabs(b.hi[i] - center[i]));
    if (d > radius + tol) return false;
  }
  return true;
}

Box Ball::bounding_box() const {
  return Box(center.array() - radius, center.array() + radius);
}

MasterGrid::MasterGrid(Box domain, Vec rho) : domain_(std::move(domain)), rho_(std::move(rho)) {
  const int n = domain_.dim();
  if (rho_.size() != n) throw std::invalid_argument("grid: rho dimension mismatch");
  shape_.resize(n);
  stride_.resize(n);
  total_ = 1;
  for (int i = 0; i < n; ++i) {
    if (!(rho_[i] > 0.0)) throw std::invalid_argument("grid: rho must be positive");
    const double w = domain_.hi[i] - domain_.lo[i];
    const double pitch = 2.0 * rho_[i];
    int cnt = (int)std::ceil(w / pitch - 1e-12);
    if (cnt < 1) cnt = 1;
    shape_[i] = cnt;
    total_ *= (std::size_t)cnt;
    if (total_ > (std::size_t)1 << 33)
      throw std::invalid_argument("grid: too many cells; increase rho");
  }
  std::size_t s = 1;
  for (int i = n - 1; i >= 0; --i) {
    stride_[i] = s;
    s *= (std::size_t)shape_[i];
  }
}

std::size_t MasterGrid::index_of(const std::vector<int>& multi) const {
  std::size_t idx = 0;
  for (int i = 0; i < dim(); ++i) idx += stride_[i] * (std::size_t)multi[i];
  return idx;
}

std::vector<int> MasterGrid::multi_of(std::size_t index) const {
  std::vector<int> m(dim());
  for (int i = 0; i < dim(); ++i) {
    m[i] = (int)(index / stride_[i]);
    index %= stride_[i];
  }
  return m;
}

Box MasterGrid::cell_box(std::size_t index) const {
  const auto m = multi_of(index);
  Vec lo(dim()), hi(dim());
  for (int i = 0; i < dim(); ++i) {
    lo[i] = domain_.lo[i] + 2.0 * rho_[i] * m[i];
    hi[i] = lo[i] + 2.0 * rho_[i];
  }
  return Box(lo, hi);
}

std::optional<std::size_t> MasterGrid::locate(const Vec& p) const {
  std::vector<int> m(dim());
  for (int i = 0; i < dim(); ++i) {
    const double u = (p[i] - domain_.lo[i]) / (2.0 * rho_[i]);
    int c = (int)std::floor(u);
    if ((double)c == u && c > 0) c -= 1;  // shared face -> lower-index cell
    if (c < 0 || c >= shape_[i]) return std::nullopt;
    m[i] = c;
  }
  return index_of(m);
}

std::optional<std::pair<std::vector<int>, std::vector<int>>> MasterGrid::index_span(const Box& b) const {
  std::vector<int> lo(dim()), hi(dim());
  for (int i = 0; i < dim(); ++i) {
    const double pitch = 2.0 * rho_[i];
    const double ulo = (b.lo[i] - domain_.lo[i]) / pitch;
    const double uhi = (b.hi[i] - domain_.lo[i]) / pitch;
    // sliver overlaps below 1e-9 of a cell are snapped away so that boxes
    // ending exactly on a face (up to fp noise) stay out of the neighbour
    int clo = (int)std::floor(ulo + 1e-9);
    int chi = (int)std::floor(uhi - 1e-9);
    if (chi < clo) chi = clo;  // degenerate (point/face) boxes still own one cell
    if (chi < 0 || clo >= shape_[i]) return std::nullopt;
    lo[i] = std::max(clo, 0);
    hi[i] = std::min(chi, shape_[i] - 1);
  }
  return std::make_pair(lo, hi);
}

bool MasterGrid::same_layout(const MasterGrid& o) const {
  return shape_ == o.shape_ && rho_ == o.rho_ && domain_.lo == o.domain_.lo &&
         domain_.hi == o.domain_.hi;
}

CellGrid::CellGrid(const MasterGrid* grid) : grid_(grid) {
  words_.assign((grid->cell_count() + 63) / 64, 0);
}

bool CellGrid::test(std::size_t index) const {
  return (words_[index / 64] >> (index % 64)) & 1u;
}

void CellGrid::set(std::size_t index) {
  std::uint64_t& w = words_[index / 64];
  const std::uint64_t bit = 1ull << (index % 64);
  if (!(w & bit)) {
    w |= bit;
    ++popcount_;
  }
}

void CellGrid::clear() {
  std::fill(words_.begin(), words_.end(), 0);
  popcount_ = 0;
}

CellGrid& CellGrid::operator|=(const CellGrid& o) {
  if (!grid_->same_layout(*o.grid_)) throw std::invalid_argument("cellgrid: layout mismatch");
  popcount_ = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    words_[i] |= o.words_[i];
    popcount_ += (std::size_t)__builtin_popcountll(words_[i]);
  }
  return *this;
}

CellGrid& CellGrid::operator&=(const CellGrid& o) {
  if (!grid_->same_layout(*o.grid_)) throw std::invalid_argument("cellgrid: layout mismatch");
  popcount_ = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    words_[i] &= o.words_[i];
    popcount_ += (std::size_t)__builtin_popcountll(words_[i]);
  }
  return *this;
}

bool CellGrid::operator==(const CellGrid& o) const {
  return grid_->same_layout(*o.grid_) && words_ == o.words_;
}

bool CellGrid::is_subset_of(const CellGrid& o) const {
  if (!grid_->same_layout(*o.grid_)) throw std::invalid_argument("cellgrid: layout mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (words_[i] & ~o.words_[i]) return false;
  return true;
}

namespace {
template <typename F>
void for_span(const MasterGrid& g, const std::vector<int>& lo, const std::vector<int>& hi, F&& f) {
  std::vector<int> cur = lo;
  for (;;) {
    f(g.index_of(cur));
    int d = g.dim() - 1;
    for (; d >= 0; --d) {
      if (++cur[d] <= hi[d]) break;
      cur[d] = lo[d];
    }
    if (d < 0) break;
  }
}
}  // namespace

void CellGrid::mark_box(const Box& b) {
  auto span = grid_->index_span(b);
  if (!span) return;
  for_span(*grid_, span->first, span->second, [&](std::size_t idx) { set(idx); });
}

void CellGrid::mark_box_inner(const Box& b, double tol) {
  auto span = grid_->index_span(b);
  if (!span) return;
  for_span(*grid_, span->first, span->second, [&](std::size_t idx) {
    if (b.contains_box(grid_->cell_box(idx), tol)) set(idx);
  });
}

bool CellGrid::contains_point(const Vec& p) const {
  auto idx = grid_->locate(p);
  return idx && test(*idx);
}

bool CellGrid::contains_box(const Box& b) const {
  if (!grid_->domain().contains_box(b, 1e-12)) return false;
  auto span = grid_->index_span(b);
  if (!span) return false;
  bool ok = true;
  for_span(*grid_, span->first, span->second, [&](std::size_t idx) {
    if (!test(idx)) ok = false;
  });
  return ok;
}

bool CellGrid::intersects_box(const Box& b) const {
  auto span = grid_->index_span(b);
  if (!span) return false;
  bool hit = false;
  for_span(*grid_, span->first, span->second, [&](std::size_t idx) {
    if (test(idx)) hit = true;
  });
  return hit;
}

CellGrid CellGrid::dilated(const std::vector<int>& k_per_axis) const {
  CellGrid out(grid_);
  const auto& shape = grid_->shape();
  for_each([&](std::size_t idx) {
    auto m = grid_->multi_of(idx);
    std::vector<int> lo(m), hi(m);
    for (int i = 0; i < grid_->dim(); ++i) {
      lo[i] = std::max(0, m[i] - k_per_axis[i]);
      hi[i] = std::min(shape[i] - 1, m[i] + k_per_axis[i]);
    }
    for_span(*grid_, lo, hi, [&](std::size_t j) { out.set(j); });
  });
  return out;
}

std::vector<std::size_t> CellGrid::occupied() const {
  std::vector<std::size_t> v;
  v.reserve(popcount_);
  for_each([&](std::size_t idx) { v.push_back(idx); });
  return v;
}

Box CellGrid::bounding_box() const {
  if (empty()) throw std::logic_error("cellgrid: bounding_box of empty set");
  Box acc;
  bool first = true;
  for_each([&](std::size_t idx) {
    const Box c = grid_->cell_box(idx);
    acc = first ? c : acc.hull(c);
    first = false;
  });
  return acc;
}

Cover cover(const Box& region, const Vec& rho) {
  if (rho.size() != region.lo.size()) throw std::invalid_argument("cover: dimension mismatch");
  for (int i = 0; i < rho.size(); ++i)
    if (!(rho[i] > 0.0)) throw std::invalid_argument("cover: rho must be positive");
  Cover c{MasterGrid(region, rho), CellGrid()};
  c.cells = CellGrid(&c.grid);
  for (std::size_t i = 0; i < c.grid.cell_count(); ++i) c.cells.set(i);
  return c;
}

bool GridRegion::contains_point(const Vec& p, double tol) const {
  if (cells.contains_point(p)) return true;
  if (has_ball && ball.contains(p, tol) && ball_clip.contains(p, tol)) return true;
  return false;
}

bool GridRegion::contains_point_within(const Vec& p, double tol) const {
  if (contains_point(p, tol)) return true;
  if (tol <= 0.0) return false;
  const Box probe(p.array() - tol, p.array() + tol);
  return cells.intersects_box(probe);
}

bool GridRegion::contains_box(const Box& b) const {
  if (has_ball) {
    auto clipped = ball.bounding_box().intersection(ball_clip);
    if (clipped && clipped->contains_box(b)) return true;
  }
  // decompose cell-by-cell: unoccupied overlap must sit inside the ball part
  auto span = cells.grid().index_span(b);
  if (!span) return false;
  if (!cells.grid().domain().contains_box(b, 1e-12)) return false;
  bool ok = true;
  std::vector<int> cur = span->first;
  for (;;) {
    const std::size_t idx = cells.grid().index_of(cur);
    if (!cells.test(idx)) {
      bool covered = false;
      if (has_ball) {
        auto overlap = cells.grid().cell_box(idx).intersection(b);
        if (overlap && ball.contains_box(*overlap) && ball_clip.contains_box(*overlap, 1e-12))
          covered = true;
      }
      if (!covered) {
        ok = false;
        break;
      }
    }
    int d = cells.grid().dim() - 1;
    for (; d >= 0; --d) {
      if (++cur[d] <= span->second[d]) break;
      cur[d] = span->first[d];
    }
    if (d < 0) break;
  }
  return ok;
}

bool GridRegion::empty() const {
  if (!cells.empty()) return false;
  if (has_ball && ball.bounding_box().intersects(ball_clip)) return false;
  return true;
}

Box GridRegion::bounding_box() const {
  if (empty()) throw std::logic_error("gridregion: bounding_box of empty region");
  std::optional<Box> acc;
  if (!cells.empty()) acc = cells.bounding_box();
  if (has_ball) {
    auto clipped = ball.bounding_box().intersection(ball_clip);
    if (clipped) acc = acc ? acc->hull(*clipped) : *clipped;
  }
  return *acc;
}

}  // namespace dhs
