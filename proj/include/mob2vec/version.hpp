#pragma once

namespace mob2vec {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace mob2vec
