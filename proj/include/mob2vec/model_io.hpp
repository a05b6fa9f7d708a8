#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>

#include "mob2vec/errors.hpp"
#include "mob2vec/reduction.hpp"
#include "mob2vec/sqn2vec.hpp"

namespace mob2vec {

inline constexpr char kModelMagic[8] = {'M', '2', 'V', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// A model container that cannot be read.
class ModelFormatError : public DataError {
 public:
  enum class Code {
    kVersion = 10,    ///< bad magic or unsupported format version
    kTruncated = 11,  ///< the file ends inside a section
    kCorrupt = 12,    ///< inconsistent header or section contents
  };

  ModelFormatError(Code code, const std::string& what) : DataError(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

/// No reducer, a fitted PCA, or a fitted UMAP.
using Reducer = std::variant<std::monostate, PcaReducer, UmapReducer>;

struct ModelBundle {
  Sqn2VecModel model;
  Reducer reducer;
};

/// Container layout: 8-byte magic, u32 format version, u64 header length, a
/// JSON header (configs, table shapes, tool version), then binary sections.
/// Embedding tables are little-endian float32; reducer state is
/// little-endian float64 so transforms reproduce exactly.
void save_model(std::ostream& out, const ModelBundle& bundle);
void save_model(const std::string& path, const ModelBundle& bundle);

/// Throws ModelFormatError on a foreign, newer, truncated or corrupt container.
ModelBundle load_model(std::istream& in);
ModelBundle load_model(const std::string& path);

}  // namespace mob2vec
