#pragma once

namespace rtdlab {

// Identifier of the built tree (git describe at configure time), recorded in
// run manifests so results can be traced back to a revision.
const char* build_id();

}  // namespace rtdlab
