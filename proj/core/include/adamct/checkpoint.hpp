#pragma once

#include <string>

#include "adamct/model.hpp"

namespace adamct {

// Checkpoint format: a text header followed by raw tensor data.
//
//   adamct-checkpoint v1\n
//   <key>=<value>\n          one line per ModelConfig field, fixed order
//   tensor_count=<k>\n
//   payload_floats=<total>\n
//   ---\n
//   <little-endian float32 values, parameters in declaration order>
//
// Payloads are always float32; saving a double model rounds. Loading checks
// the magic line (version mismatch), header integrity, and that the payload
// length matches the config-derived parameter count exactly.
template <typename T>
void save_checkpoint(const AdaMCTModel<T>& model, const std::string& path);

template <typename T>
AdaMCTModel<T> load_checkpoint(const std::string& path);

}  // namespace adamct
