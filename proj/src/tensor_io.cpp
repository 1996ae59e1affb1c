// tensor_io.cpp

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

#include "scoh/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace scoh {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

constexpr const char *kMagic = "scoh-tensors";

nn::Shape ParseShape(const std::string &text) {
  nn::Shape shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      shape.push_back(std::stol(part));
    } catch (const std::exception &) {
      Fail(ErrorKind::kFormat, "bad tensor shape '" + text + "'");
    }
    Require(shape.back() >= 0, ErrorKind::kFormat, "negative tensor dimension");
  }
  Require(!shape.empty(), ErrorKind::kFormat, "empty tensor shape");
  return shape;
}

}  // namespace

const NamedTensor &TensorFile::Get(const std::string &name) const {
  for (const auto &t : tensors)
    if (t.name == name) return t;
  Fail(ErrorKind::kFormat, "model file has no tensor '" + name + "'");
}

const std::string &TensorFile::Meta(const std::string &key) const {
  auto it = meta.find(key);
  Require(it != meta.end(), ErrorKind::kFormat, "model file has no '" + key + "' entry");
  return it->second;
}

void WriteTensorFile(const TensorFile &file, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out << kMagic << " 1 " << file.kind << '\n';
  for (const auto &[key, value] : file.meta) out << "meta " << key << ' ' << value << '\n';
  for (const auto &t : file.tensors) {
    Require(nn::NumElements(t.shape) == t.data.size(), ErrorKind::kSize,
            "tensor '" + t.name + "' does not match its shape");
    out << "tensor " << t.name << " f32 " << nn::ShapeString(t.shape) << '\n';
    std::vector<float> payload(t.data.data(), t.data.data() + t.data.size());
    out.write(reinterpret_cast<const char *>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    out << '\n';
  }
  out << "end\n";
  Require(static_cast<bool>(out), ErrorKind::kIo, "write to '" + path + "' failed");
}

TensorFile ReadTensorFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path + "'");
  TensorFile file;
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorKind::kFormat, "empty model file");
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version >> file.kind;
    Require(magic == kMagic && version == 1, ErrorKind::kFormat, "'" + path + "' is not a model file");
  }
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") return file;
    if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      file.meta[key] = value;
    } else if (tag == "tensor") {
      NamedTensor t;
      std::string dtype, shape;
      ls >> t.name >> dtype >> shape;
      Require(dtype == "f32", ErrorKind::kUnsupported, "tensor dtype '" + dtype + "'");
      t.shape = ParseShape(shape);
      std::vector<float> payload(nn::NumElements(t.shape));
      in.read(reinterpret_cast<char *>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
      Require(static_cast<bool>(in), ErrorKind::kFormat, "truncated tensor '" + t.name + "'");
      Require(in.get() == '\n', ErrorKind::kFormat, "missing separator after '" + t.name + "'");
      t.data = Eigen::Map<Eigen::VectorXf>(payload.data(), payload.size()).cast<double>();
      file.tensors.push_back(std::move(t));
    } else {
      Fail(ErrorKind::kFormat, "unexpected line in model file: '" + line + "'");
    }
  }
  Fail(ErrorKind::kFormat, "model file '" + path + "' has no end marker");
}

void LoadInto(nn::Tensor &param, const NamedTensor &stored) {
  Require(param.shape() == stored.shape, ErrorKind::kSize,
          "tensor '" + stored.name + "' has shape " + nn::ShapeString(stored.shape) + ", expected " +
              nn::ShapeString(param.shape()));
  param.value() = stored.data;
}

}  // namespace scoh
