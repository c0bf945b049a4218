#ifndef DHS_BACKREACH_HPP_
#define DHS_BACKREACH_HPP_

#include "dhs/reach.hpp"

namespace dhs {

struct BackreachResult {
  CellGrid guard_star;           // G*(e), master-grid cells fully certified
  long long candidates_examined = 0;
  long long refined = 0;
  /* Hull of the trailing [D - r', D] tube windows over accepted cells
   * (before the reset); extends K_n of the target mode. Unset when empty. */
  std::optional<Box> landing_window;
};

/* Candidate universe G~(e) ⊎ d: cells of I^ within d + 4 rho of G~ centers
 * (dilation by ceil((d+4rho)/(2rho)) cells per axis), plus G~ itself. */
CellGrid candidate_set(const CellGrid& fake_guard, const CellGrid& i_star_cells, const Vec& d,
                       const Vec& rho);

/* Under-approximate backward reachable set of the fake guard across the jump
 * delay: a cell is kept iff its forward tube stays inside I*(q) over
 * [0, D(e)], the time-D(e) slice lands inside G~(e), and the reset image of
 * its trailing [D - r_post, D] window fits in `landing_constraint` (the
 * target mode's I ∩ S hull, so the K_n extension survives the safe clip).
 * Straddling cells are refined (rho/2, recursively) and count only via full
 * child coverage. */
BackreachResult back_reach(const CellGrid& fake_guard, double jump_delay,
                           const GridRegion& i_star, const ReachEngine& engine, double r_post,
                           const Reset& reset, const Box& landing_constraint);

}  // namespace dhs

#endif
