#include "wafer/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "wafer/error.hpp"

namespace wafer::nn {

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "wafer-params 1\n";
  for (const auto& [k, v] : ckpt.meta) {
    if (k.empty() || k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw InvalidArgument("checkpoint meta key/value must be single-line and key space-free");
    }
    out << "meta " << k << ' ' << v << '\n';
  }
  char buf[64];
  for (const auto& [name, t] : ckpt.tensors) {
    out << "param " << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, t[i]);
      if (i) out << ' ';
      out.write(buf, end - buf);
    }
    out << '\n';
  }
  out << "end\n";
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "wafer-params 1") {
    throw ParseError(path.string() + ": not a wafer-params v1 checkpoint", line_no);
  }
  Checkpoint ckpt;
  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "end") {
      ended = true;
      break;
    }
    if (line.starts_with("meta ")) {
      const auto sp = line.find(' ', 5);
      if (sp == std::string::npos) {
        ckpt.meta.emplace_back(line.substr(5), "");
      } else {
        ckpt.meta.emplace_back(line.substr(5, sp - 5), line.substr(sp + 1));
      }
      continue;
    }
    if (!line.starts_with("param ")) throw ParseError("unexpected line in checkpoint", line_no);
    std::istringstream hdr(line.substr(6));
    std::string name;
    std::size_t rank = 0;
    if (!(hdr >> name >> rank)) throw ParseError("bad param header", line_no);
    Shape shape(rank);
    for (auto& d : shape) {
      if (!(hdr >> d)) throw ParseError("bad param shape", line_no);
    }
    std::string values;
    if (!std::getline(in, values)) throw ParseError("missing values for " + name, line_no);
    ++line_no;
    std::vector<float> v;
    v.reserve(shape_size(shape));
    const char* p = values.data();
    const char* end = values.data() + values.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float x = 0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc{}) throw ParseError("bad value in " + name, line_no);
      v.push_back(x);
      p = next;
    }
    if (v.size() != shape_size(shape)) {
      throw ParseError("parameter " + name + " has " + std::to_string(v.size()) +
                           " values, shape needs " + std::to_string(shape_size(shape)),
                       line_no);
    }
    ckpt.tensors.emplace_back(name, Tensor<float>(std::move(shape), std::move(v)));
  }
  if (!ended) throw ParseError("checkpoint truncated (no 'end' line)", line_no);
  return ckpt;
}

Checkpoint capture(const Sequential<float>& net) {
  Checkpoint c;
  for (const auto* p : net.parameters()) c.tensors.emplace_back(p->name, p->value);
  return c;
}

void restore(Sequential<float>& net, const Checkpoint& ckpt) {
  for (auto* p : net.parameters()) {
    const Tensor<float>* found = nullptr;
    for (const auto& [name, t] : ckpt.tensors) {
      if (name == p->name) found = &t;
    }
    if (found == nullptr) throw DataError("checkpoint lacks parameter '" + p->name + "'");
    if (found->shape() != p->value.shape()) {
      throw ShapeError("checkpoint parameter '" + p->name + "' has shape " +
                       shape_string(found->shape()) + ", network expects " +
                       shape_string(p->value.shape()));
    }
    p->value = *found;
  }
}

}  // namespace wafer::nn
