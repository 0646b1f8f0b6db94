#include "rtdlab/core/build_info.hpp"

#ifndef RTDLAB_BUILD_ID
#define RTDLAB_BUILD_ID "unknown"
#endif

namespace rtdlab {

const char* build_id() { return RTDLAB_BUILD_ID; }

}  // namespace rtdlab
