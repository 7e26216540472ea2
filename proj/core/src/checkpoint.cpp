#include "adamct/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace adamct {

namespace {

constexpr const char* kMagic = "adamct-checkpoint v1";

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string header_text(const ModelConfig& c, Index tensor_count,
                        Index payload_floats) {
  std::ostringstream os;
  os << kMagic << "\n";
  os << "num_items=" << c.num_items << "\n";
  os << "d_model=" << c.d_model << "\n";
  os << "layers=" << c.num_layers << "\n";
  os << "heads=" << c.num_heads << "\n";
  os << "kernel=" << c.kernel_size << "\n";
  os << "reduction=" << c.reduction << "\n";
  os << "conv_activation=" << to_string(c.conv_activation) << "\n";
  os << "max_len=" << c.max_len << "\n";
  os << "dropout_hidden=" << format_double(c.dropout_hidden) << "\n";
  os << "dropout_attn=" << format_double(c.dropout_attn) << "\n";
  os << "seatt_local=" << to_string(c.seatt_local) << "\n";
  os << "seatt_global=" << to_string(c.seatt_global) << "\n";
  os << "mixture_mode=" << to_string(c.mixture_mode) << "\n";
  os << "alpha0=" << format_double(c.alpha0) << "\n";
  os << "conv_padding=" << to_string(c.conv_padding) << "\n";
  os << "seatt_enabled=" << (c.seatt_enabled ? 1 : 0) << "\n";
  os << "tensor_count=" << tensor_count << "\n";
  os << "payload_floats=" << payload_floats << "\n";
  os << "---\n";
  return os.str();
}

void write_le_float(std::ostream& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {
      static_cast<char>(bits & 0xFF),
      static_cast<char>((bits >> 8) & 0xFF),
      static_cast<char>((bits >> 16) & 0xFF),
      static_cast<char>((bits >> 24) & 0xFF),
  };
  out.write(bytes, 4);
}

bool read_le_float(std::istream& in, float& v) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (in.gcount() != 4) {
    return false;
  }
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  v = std::bit_cast<float>(bits);
  return true;
}

std::string expect_kv(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) {
    throw CheckpointError(CheckpointError::Kind::kBadHeader,
                          "checkpoint header ends before key '" + key + "'");
  }
  const auto eq = line.find('=');
  if (eq == std::string::npos || line.substr(0, eq) != key) {
    throw CheckpointError(CheckpointError::Kind::kBadHeader,
                          "checkpoint header: expected key '" + key +
                              "', got line '" + line + "'");
  }
  return line.substr(eq + 1);
}

}  // namespace

template <typename T>
void save_checkpoint(const AdaMCTModel<T>& model, const std::string& path) {
  const auto params = model.parameters();
  Index payload = 0;
  for (const auto& p : params) payload += p.tensor.numel();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "cannot open checkpoint for writing: " + path);
  }
  out << header_text(model.config, params.size(), payload);
  for (const auto& p : params) {
    for (const T v : p.tensor.data()) {
      write_le_float(out, static_cast<float>(v));
    }
  }
  if (!out) {
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "failed while writing checkpoint: " + path);
  }
}

template <typename T>
AdaMCTModel<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::kIo,
                          "cannot open checkpoint: " + path);
  }
  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw CheckpointError(CheckpointError::Kind::kVersionMismatch,
                          "not an '" + std::string(kMagic) + "' file: " + path);
  }

  ModelConfig c;
  try {
    c.num_items = std::stoll(expect_kv(in, "num_items"));
    c.d_model = std::stoul(expect_kv(in, "d_model"));
    c.num_layers = std::stoul(expect_kv(in, "layers"));
    c.num_heads = std::stoul(expect_kv(in, "heads"));
    c.kernel_size = std::stoul(expect_kv(in, "kernel"));
    c.reduction = std::stoul(expect_kv(in, "reduction"));
    c.conv_activation = act_kind_from_string(expect_kv(in, "conv_activation"));
    c.max_len = std::stoul(expect_kv(in, "max_len"));
    c.dropout_hidden = std::stod(expect_kv(in, "dropout_hidden"));
    c.dropout_attn = std::stod(expect_kv(in, "dropout_attn"));
    c.seatt_local = seatt_score_from_string(expect_kv(in, "seatt_local"));
    c.seatt_global = seatt_score_from_string(expect_kv(in, "seatt_global"));
    c.mixture_mode = mixture_mode_from_string(expect_kv(in, "mixture_mode"));
    c.alpha0 = std::stod(expect_kv(in, "alpha0"));
    c.conv_padding = conv_padding_from_string(expect_kv(in, "conv_padding"));
    c.seatt_enabled = expect_kv(in, "seatt_enabled") == "1";
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::kBadHeader, e.what());
  } catch (const std::logic_error& e) {
    throw CheckpointError(CheckpointError::Kind::kBadHeader,
                          std::string("checkpoint header: ") + e.what());
  }

  const Index tensor_count = std::stoul(expect_kv(in, "tensor_count"));
  const Index payload_floats = std::stoul(expect_kv(in, "payload_floats"));
  std::string sep;
  if (!std::getline(in, sep) || sep != "---") {
    throw CheckpointError(CheckpointError::Kind::kBadHeader,
                          "checkpoint header missing '---' separator");
  }

  RngState rng(0);  // structure only; every value is overwritten below
  AdaMCTModel<T> model = init_model<T>(c, rng);
  const auto params = model.parameters();
  Index expected = 0;
  for (const auto& p : params) expected += p.tensor.numel();
  if (params.size() != tensor_count || expected != payload_floats) {
    throw CheckpointError(
        CheckpointError::Kind::kSizeMismatch,
        "checkpoint header declares " + std::to_string(tensor_count) +
            " tensors / " + std::to_string(payload_floats) +
            " floats but the config implies " + std::to_string(params.size()) +
            " / " + std::to_string(expected));
  }

  for (const auto& p : params) {
    Tensor<T> t = p.tensor;
    auto dst = t.data();
    for (Index i = 0; i < dst.size(); ++i) {
      float v = 0.0f;
      if (!read_le_float(in, v)) {
        throw CheckpointError(CheckpointError::Kind::kTruncatedPayload,
                              "checkpoint payload truncated inside " + p.name);
      }
      dst[i] = static_cast<T>(v);
    }
  }
  // Anything left over means the payload disagrees with the header.
  char extra;
  if (in.read(&extra, 1); in.gcount() == 1) {
    throw CheckpointError(CheckpointError::Kind::kSizeMismatch,
                          "checkpoint payload longer than header declares");
  }
  return model;
}

template void save_checkpoint(const AdaMCTModel<float>&, const std::string&);
template void save_checkpoint(const AdaMCTModel<double>&, const std::string&);
template AdaMCTModel<float> load_checkpoint(const std::string&);
template AdaMCTModel<double> load_checkpoint(const std::string&);

}  // namespace adamct
