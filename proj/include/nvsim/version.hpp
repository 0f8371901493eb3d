#ifndef NVSIM_VERSION_HPP
#define NVSIM_VERSION_HPP

namespace nvsim {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
