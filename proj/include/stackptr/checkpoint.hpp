#pragma once

// Binary checkpoint container, little-endian:
//
//   magic "STKPTRCK" | u32 version | u32 model kind (0 stackptr, 1 biaf)
//   str config JSON | u32 POS column (0 upos, 1 xpos)
//   4 symbol tables (words, chars, pos, labels): u64 reserved, u64 count, str...
//   u64 parameter count, then per parameter: str name, u64 rows, u64 cols, f64 values
//
// where str is a u64 byte length followed by the bytes.

#include <memory>
#include <string>
#include <string_view>

#include "stackptr/model.hpp"

namespace stackptr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Model& model);
std::unique_ptr<Model> deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace stackptr
