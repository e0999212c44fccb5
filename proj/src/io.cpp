// SPDX-License-Identifier: Apache-2.0

#include "semd/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace semd {
namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoError::Code::kFileAccess, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoError::Code::kFileAccess, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Code::kFileAccess, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& what) : bytes_(bytes), what_(what) {}

  template <typename T>
  T scalar() {
    if (at_ + sizeof(T) > bytes_.size())
      throw IoError(IoError::Code::kTruncated, what_ + ": truncated");
    T value;
    std::memcpy(&value, bytes_.data() + at_, sizeof(T));
    at_ += sizeof(T);
    return value;
  }

  void magic(const char expected[4]) {
    if (at_ + 4 > bytes_.size()) throw IoError(IoError::Code::kTruncated, what_ + ": truncated");
    if (std::memcmp(bytes_.data() + at_, expected, 4) != 0)
      throw IoError(IoError::Code::kBadMagic, what_ + ": bad magic");
    at_ += 4;
  }

  bool exhausted() const { return at_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string what_;
  std::size_t at_ = 0;
};

class ByteWriter {
 public:
  template <typename T>
  void scalar(T value) {
    const std::size_t at = bytes_.size();
    bytes_.resize(at + sizeof(T));
    std::memcpy(bytes_.data() + at, &value, sizeof(T));
  }

  void magic(const char m[4]) { bytes_.append(m, 4); }

  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

}  // namespace

FeatureMap read_fmap(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes, path.string());
  reader.magic("FMAP");
  const auto version = reader.scalar<std::uint32_t>();
  if (version != kFmapVersion)
    throw IoError(IoError::Code::kBadVersion,
                  path.string() + ": unsupported version " + std::to_string(version));
  const auto h = reader.scalar<std::uint32_t>();
  const auto w = reader.scalar<std::uint32_t>();
  const auto c = reader.scalar<std::uint32_t>();
  if (h == 0 || w == 0 || c == 0)
    throw IoError(IoError::Code::kTruncated, path.string() + ": zero dimension in header");

  NodeMatrix nodes(static_cast<Index>(h) * static_cast<Index>(w), static_cast<Index>(c));
  for (Index i = 0; i < nodes.rows(); ++i)
    for (Index j = 0; j < nodes.cols(); ++j) {
      const float value = reader.scalar<float>();
      if (!std::isfinite(value))
        throw IoError(IoError::Code::kNonFinite, path.string() + ": non-finite payload value");
      nodes(i, j) = static_cast<double>(value);
    }
  if (!reader.exhausted())
    throw IoError(IoError::Code::kTruncated, path.string() + ": trailing bytes after payload");
  return FeatureMap(static_cast<Index>(h), static_cast<Index>(w), std::move(nodes));
}

void write_fmap(const FeatureMap& map, const std::filesystem::path& path) {
  ByteWriter writer;
  writer.magic("FMAP");
  writer.scalar<std::uint32_t>(kFmapVersion);
  writer.scalar<std::uint32_t>(static_cast<std::uint32_t>(map.height()));
  writer.scalar<std::uint32_t>(static_cast<std::uint32_t>(map.width()));
  writer.scalar<std::uint32_t>(static_cast<std::uint32_t>(map.channels()));
  for (Index i = 0; i < map.nodes().rows(); ++i)
    for (Index j = 0; j < map.nodes().cols(); ++j)
      writer.scalar<float>(static_cast<float>(map.nodes()(i, j)));
  write_file_atomic(path, writer.take());
}

EncoderParams read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes, path.string());
  reader.magic("SEMD");
  const auto version = reader.scalar<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError(IoError::Code::kBadVersion,
                  path.string() + ": unsupported version " + std::to_string(version));

  const auto layers = reader.scalar<std::uint32_t>();
  if (layers != kConvLayers)
    throw IoError(IoError::Code::kBadTopology, path.string() + ": unexpected layer count");
  for (std::size_t i = 0; i < kChannelPlan.size(); ++i)
    if (reader.scalar<std::uint32_t>() != kChannelPlan[i])
      throw IoError(IoError::Code::kBadTopology, path.string() + ": channel plan mismatch");
  if (reader.scalar<std::uint32_t>() != kProjDim || reader.scalar<std::uint32_t>() != kEmbedDim)
    throw IoError(IoError::Code::kBadTopology, path.string() + ": head dim mismatch");

  EncoderParams params = EncoderParams::zeros();
  const auto count = reader.scalar<std::uint64_t>();
  if (count != static_cast<std::uint64_t>(params.param_count()))
    throw IoError(IoError::Code::kBadTopology, path.string() + ": parameter count mismatch");
  Vector flat(static_cast<Index>(count));
  for (Index i = 0; i < flat.size(); ++i) {
    flat(i) = reader.scalar<double>();
    if (!std::isfinite(flat(i)))
      throw IoError(IoError::Code::kNonFinite, path.string() + ": non-finite parameter");
  }
  if (!reader.exhausted())
    throw IoError(IoError::Code::kTruncated, path.string() + ": trailing bytes");
  return EncoderParams::from_vector(flat);
}

void write_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  ByteWriter writer;
  writer.magic("SEMD");
  writer.scalar<std::uint32_t>(kCheckpointVersion);
  writer.scalar<std::uint32_t>(kConvLayers);
  for (Index channels : kChannelPlan) writer.scalar<std::uint32_t>(static_cast<std::uint32_t>(channels));
  writer.scalar<std::uint32_t>(static_cast<std::uint32_t>(kProjDim));
  writer.scalar<std::uint32_t>(static_cast<std::uint32_t>(kEmbedDim));
  const Vector flat = params.to_vector();
  writer.scalar<std::uint64_t>(static_cast<std::uint64_t>(flat.size()));
  for (Index i = 0; i < flat.size(); ++i) writer.scalar<double>(flat(i));
  write_file_atomic(path, writer.take());
}

namespace {

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc() && result.ptr == end;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc() && result.ptr == end;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(begin, last - begin + 1);
}

}  // namespace

TrainConfig parse_run_config(const std::string& text) {
  TrainConfig cfg;
  std::vector<std::string> errors;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;

  auto fail = [&errors, &line_no](const std::string& what) {
    errors.push_back("line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(stream, line)) {
    ++line_no;
    const std::string content = trim(line);
    if (content.empty() || content[0] == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      fail("expected key=value");
      continue;
    }
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));

    double d = 0.0;
    std::int64_t n = 0;
    if (key == "lambda") {
      if (parse_double(value, d) && d > 0.0)
        cfg.sinkhorn.lambda = d;
      else
        fail("lambda must be a positive number");
    } else if (key == "iterations") {
      if (parse_int64(value, n) && n >= 1)
        cfg.sinkhorn.iterations = static_cast<int>(n);
      else
        fail("iterations must be an integer >= 1");
    } else if (key == "grid_sizes") {
      std::vector<Index> grids;
      std::istringstream items(value);
      std::string item;
      bool ok = !value.empty();
      while (ok && std::getline(items, item, ',')) {
        std::int64_t g = 0;
        if (parse_int64(trim(item), g) && g >= 1)
          grids.push_back(static_cast<Index>(g));
        else
          ok = false;
      }
      if (ok && !grids.empty())
        cfg.pyramid.grid_sizes = grids;
      else
        fail("grid_sizes must be a comma list of integers >= 1");
    } else if (key == "momentum") {
      if (parse_double(value, d) && d >= 0.0 && d <= 1.0)
        cfg.momentum = d;
      else
        fail("momentum must be in [0, 1]");
    } else if (key == "seed") {
      if (parse_int64(value, n) && n >= 0)
        cfg.seed = static_cast<std::uint64_t>(n);
      else
        fail("seed must be a nonnegative integer");
    } else if (key == "steps") {
      if (parse_int64(value, n) && n >= 0)
        cfg.steps = static_cast<int>(n);
      else
        fail("steps must be an integer >= 0");
    } else if (key == "batch") {
      if (parse_int64(value, n) && n >= 1)
        cfg.batch = static_cast<int>(n);
      else
        fail("batch must be an integer >= 1");
    } else if (key == "lr") {
      if (parse_double(value, d) && d > 0.0)
        cfg.lr = d;
      else
        fail("lr must be a positive number");
    } else if (key == "loss_mix") {
      if (parse_double(value, d) && d >= 0.0)
        cfg.loss_mix = d;
      else
        fail("loss_mix must be >= 0");
    } else if (key == "small_view") {
      if (value == "true" || value == "1")
        cfg.small_view = true;
      else if (value == "false" || value == "0")
        cfg.small_view = false;
      else
        fail("small_view must be true/false/1/0");
    } else {
      fail("unknown key '" + key + "'");
    }
  }

  if (!errors.empty()) {
    std::string message = "invalid run config:";
    for (const auto& e : errors) message += "\n  " + e;
    throw ConfigError(message);
  }
  return cfg;
}

TrainConfig read_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path));
}

std::string format_double(double value) {
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    double parsed = 0.0;
    if (parse_double(buf, parsed) && parsed == value) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_history_csv(const std::vector<StepRecord>& history,
                       const std::filesystem::path& path) {
  std::string out = "step,lr,emd_ab,emd_ba,vec_ab,vec_ba,total\n";
  for (const StepRecord& r : history) {
    out += std::to_string(r.step);
    out += ',';
    out += format_double(r.lr);
    out += ',';
    out += format_double(r.emd_ab);
    out += ',';
    out += format_double(r.emd_ba);
    out += ',';
    out += format_double(r.vec_ab);
    out += ',';
    out += format_double(r.vec_ba);
    out += ',';
    out += format_double(r.total);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_grid_csv(const Matrix& grid, const std::filesystem::path& path) {
  std::string out;
  for (Index i = 0; i < grid.rows(); ++i) {
    for (Index j = 0; j < grid.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(grid(i, j));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_text_atomic(const std::string& text, const std::filesystem::path& path) {
  write_file_atomic(path, text);
}

}  // namespace semd
