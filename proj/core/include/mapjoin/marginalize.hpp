#pragma once

#include <vector>

#include "mapjoin/local_map.hpp"

namespace mapjoin {

/// Removes the given entries from the map while preserving the marginal
/// distribution of the rest: the information matrix becomes the Schur
/// complement I_kk - I_kr I_rr^-1 I_rk. The frame is unchanged.
///
/// Throws MissingEntityError for keys absent from the map, InvalidInputError
/// when nothing would remain, and SingularMarginalizationError when the
/// removed block is not invertible.
LocalMap marginalize(const LocalMap& m, const std::vector<StateKey>& remove);

/// Convenience: marginalizes out every pose, leaving a feature-only map.
LocalMap marginalize_poses(const LocalMap& m);

}  // namespace mapjoin
