// scoh/tensor_io.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Model files: a text header, then one "tensor <name> f32 <shape>" line per
// tensor immediately followed by its little-endian float32 payload, and a
// closing "end" line. Key-value metadata lines precede the first tensor.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "scoh/micrograd.hpp"

namespace scoh {

struct NamedTensor {
  std::string name;
  nn::Shape shape;
  Eigen::VectorXd data;
};

struct TensorFile {
  std::string kind;                          // e.g. "scnet", "gladlite"
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  /// Throws a format error when the name is absent.
  const NamedTensor &Get(const std::string &name) const;
  const std::string &Meta(const std::string &key) const;
};

void WriteTensorFile(const TensorFile &file, const std::string &path);
TensorFile ReadTensorFile(const std::string &path);

/// Copies stored values into an existing parameter, checking its shape.
void LoadInto(nn::Tensor &param, const NamedTensor &stored);

}  // namespace scoh
