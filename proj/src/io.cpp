#include "mlcsc/io.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace mlcsc::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  std::array<char, 40> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw NumericError("format_double failed");
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{}) throw FormatError("cannot parse number: '" + s + "'");
  return v;
}

namespace {

constexpr char kMagic[4] = {'M', 'L', 'C', 'T'};

void append_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void dump(const fs::path& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

}  // namespace

std::vector<char> encode_tensor(const TensorD& t) {
  std::vector<char> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  append_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (Index d = 0; d < t.ndim(); ++d) append_u32(out, static_cast<std::uint32_t>(t.extent(d)));
  const std::size_t bytes = static_cast<std::size_t>(t.size()) * sizeof(double);
  const std::size_t head = out.size();
  out.resize(head + bytes);
  std::memcpy(out.data() + head, t.data(), bytes);
  return out;
}

TensorD decode_tensor(const char* data, std::size_t size) {
  if (size < 8 || std::memcmp(data, kMagic, 4) != 0)
    throw FormatError("MLCT: bad magic bytes");
  const std::uint32_t ndim = get_u32(data + 4);
  if (ndim == 0) throw FormatError("MLCT: ndim 0 marks an operator container, not a tensor");
  if (ndim > 8) throw FormatError("MLCT: implausible rank " + std::to_string(ndim));
  if (size < 8 + 4ull * ndim) throw FormatError("MLCT: truncated header");
  Shape shape;
  std::uint64_t numel = 1;
  for (std::uint32_t d = 0; d < ndim; ++d) {
    const std::uint32_t e = get_u32(data + 8 + 4 * d);
    if (e == 0) throw FormatError("MLCT: zero extent");
    shape.push_back(static_cast<Index>(e));
    numel *= e;
  }
  const std::size_t head = 8 + 4ull * ndim;
  if (size != head + numel * sizeof(double))
    throw FormatError("MLCT: payload length mismatch (have " + std::to_string(size - head) +
                      " bytes, expect " + std::to_string(numel * sizeof(double)) + ")");
  TensorD t(shape);
  std::memcpy(t.data(), data + head, numel * sizeof(double));
  return t;
}

void write_tensor(const fs::path& path, const TensorD& t) { dump(path, encode_tensor(t)); }

TensorD read_tensor(const fs::path& path) {
  const std::vector<char> data = slurp(path);
  return decode_tensor(data.data(), data.size());
}

// ---------------- operator container ----------------

namespace {

json shape_to_json(const Shape& s) {
  json a = json::array();
  for (Index e : s) a.push_back(e);
  return a;
}

json blob_entry(std::vector<char>& payload, const std::vector<char>& blob) {
  const std::size_t offset = payload.size();
  payload.insert(payload.end(), blob.begin(), blob.end());
  return json{{"offset", offset}, {"length", blob.size()}};
}

}  // namespace

std::vector<char> encode_operator(const LinearOperator<double>& op) {
  json header;
  header["kind"] = op_kind_name(op.kind());
  header["in_shape"] = shape_to_json(op.in_shape());
  header["out_shape"] = shape_to_json(op.out_shape());
  std::vector<char> payload;
  switch (op.kind()) {
    case OpKind::identity:
      break;
    case OpKind::diagonal_mask:
      header["mask"] = blob_entry(payload, encode_tensor(op.payload()));
      break;
    case OpKind::blockwise_dense:
      header["block_edge"] = op.block_edge();
      header["mats"] = blob_entry(payload, encode_tensor(op.payload()));
      break;
    case OpKind::composition:
    case OpKind::blend: {
      json kids = json::array();
      for (const auto& child : op.children())
        kids.push_back(blob_entry(payload, encode_operator(*child)));
      header["children"] = kids;
      if (op.kind() == OpKind::blend) header["alpha"] = op.blend_alpha();
      break;
    }
    case OpKind::jpeg_pipeline:
      header["height"] = op.in_shape()[1];
      header["width"] = op.in_shape()[2];
      header["quality"] = op.jpeg_quality();
      header["mask"] = blob_entry(payload, encode_tensor(op.payload()));
      break;
    case OpKind::camera_stack:
      header["cams"] = blob_entry(payload, encode_tensor(op.payload()));
      break;
  }
  const std::string htext = header.dump();
  std::vector<char> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  append_u32(out, 0);  // container marker
  append_u64(out, htext.size());
  out.insert(out.end(), htext.begin(), htext.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

namespace {

std::pair<const char*, std::size_t> payload_blob(const char* payload, std::size_t payload_size,
                                                 const json& entry) {
  const std::size_t offset = entry.at("offset").get<std::size_t>();
  const std::size_t length = entry.at("length").get<std::size_t>();
  if (offset + length > payload_size) throw FormatError("operator container: blob out of range");
  return {payload + offset, length};
}

Shape shape_from_json(const json& a) {
  Shape s;
  for (const auto& e : a) s.push_back(e.get<Index>());
  return s;
}

}  // namespace

LinearOperator<double> decode_operator(const char* data, std::size_t size) {
  if (size < 16 || std::memcmp(data, kMagic, 4) != 0)
    throw FormatError("operator container: bad magic bytes");
  if (get_u32(data + 4) != 0)
    throw FormatError("operator container: missing ndim-0 marker (plain tensor file?)");
  const std::uint64_t hlen = get_u64(data + 8);
  if (16 + hlen > size) throw FormatError("operator container: truncated header");
  json header;
  try {
    header = json::parse(std::string(data + 16, data + 16 + hlen));
  } catch (const json::exception& e) {
    throw FormatError(std::string("operator container: bad JSON header: ") + e.what());
  }
  const char* payload = data + 16 + hlen;
  const std::size_t payload_size = size - 16 - hlen;
  const std::string kind = header.at("kind").get<std::string>();

  if (kind == "identity") {
    return LinearOperator<double>::identity(shape_from_json(header.at("in_shape")));
  }
  if (kind == "diagonal-mask") {
    auto [p, l] = payload_blob(payload, payload_size, header.at("mask"));
    return LinearOperator<double>::diagonal_mask(decode_tensor(p, l));
  }
  if (kind == "blockwise-dense") {
    auto [p, l] = payload_blob(payload, payload_size, header.at("mats"));
    return LinearOperator<double>::blockwise_dense(shape_from_json(header.at("in_shape")),
                                                   header.at("block_edge").get<Index>(),
                                                   decode_tensor(p, l));
  }
  if (kind == "composition" || kind == "blend") {
    const auto& kids = header.at("children");
    if (kids.size() != 2) throw FormatError("operator container: expected 2 children");
    auto [p0, l0] = payload_blob(payload, payload_size, kids[0]);
    auto [p1, l1] = payload_blob(payload, payload_size, kids[1]);
    LinearOperator<double> a = decode_operator(p0, l0);
    LinearOperator<double> b = decode_operator(p1, l1);
    if (kind == "composition")
      return LinearOperator<double>::composition(std::move(a), std::move(b));
    return LinearOperator<double>::blend(std::move(a), std::move(b),
                                         header.at("alpha").get<double>());
  }
  if (kind == "jpeg-pipeline") {
    auto [p, l] = payload_blob(payload, payload_size, header.at("mask"));
    return LinearOperator<double>::jpeg_pipeline(header.at("height").get<Index>(),
                                                 header.at("width").get<Index>(),
                                                 decode_tensor(p, l),
                                                 header.at("quality").get<int>());
  }
  if (kind == "camera-stack") {
    auto [p, l] = payload_blob(payload, payload_size, header.at("cams"));
    return LinearOperator<double>::camera_stack(decode_tensor(p, l));
  }
  throw FormatError("operator container: unknown kind '" + kind + "'");
}

void write_operator(const fs::path& path, const LinearOperator<double>& op) {
  dump(path, encode_operator(op));
}

LinearOperator<double> read_operator(const fs::path& path) {
  const std::vector<char> data = slurp(path);
  return decode_operator(data.data(), data.size());
}

// ---------------- PNM ----------------

namespace {

int pnm_next_int(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    const int c = in.peek();
    if (c == EOF) throw FormatError("PNM: truncated header");
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int v = 0;
  in >> v;
  if (!in) throw FormatError("PNM: malformed header number");
  return v;
}

std::vector<unsigned char> pnm_payload(std::istream& in, std::size_t n) {
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw FormatError("PNM: truncated pixel payload");
  return bytes;
}

unsigned char quantize(double v) {
  const double scaled = std::lround(std::min(1.0, std::max(0.0, v)) * 255.0);
  return static_cast<unsigned char>(scaled);
}

}  // namespace

void write_ppm(const fs::path& path, const TensorD& rgb) {
  if (rgb.ndim() != 3 || rgb.extent(0) != 3)
    throw ShapeError("write_ppm: expected (3,H,W), got " + shape_str(rgb.shape()));
  const Index h = rgb.extent(1), w = rgb.extent(2);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P6\n" << w << " " << h << "\n255\n";
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j)
      for (Index c = 0; c < 3; ++c) out.put(static_cast<char>(quantize(rgb(c, i, j))));
  if (!out) throw FormatError("short write to " + path.string());
}

TensorD read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw FormatError("read_ppm: not a binary PPM (P6): " + path.string());
  const int w = pnm_next_int(in), h = pnm_next_int(in), maxval = pnm_next_int(in);
  if (w <= 0 || h <= 0) throw FormatError("read_ppm: bad dimensions");
  if (maxval != 255)
    throw FormatError("read_ppm: only maxval 255 is supported, got " + std::to_string(maxval));
  const auto bytes = pnm_payload(in, static_cast<std::size_t>(w) * h * 3);
  TensorD img({3, h, w});
  std::size_t k = 0;
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j)
      for (Index c = 0; c < 3; ++c) img(c, i, j) = bytes[k++] / 255.0;
  return img;
}

void write_pgm(const fs::path& path, const TensorD& gray) {
  if (gray.ndim() != 2)
    throw ShapeError("write_pgm: expected (H,W), got " + shape_str(gray.shape()));
  const Index h = gray.extent(0), w = gray.extent(1);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j) out.put(static_cast<char>(quantize(gray(i, j))));
  if (!out) throw FormatError("short write to " + path.string());
}

TensorD read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw FormatError("read_pgm: not a binary PGM (P5): " + path.string());
  const int w = pnm_next_int(in), h = pnm_next_int(in), maxval = pnm_next_int(in);
  if (w <= 0 || h <= 0) throw FormatError("read_pgm: bad dimensions");
  if (maxval != 255)
    throw FormatError("read_pgm: only maxval 255 is supported, got " + std::to_string(maxval));
  const auto bytes = pnm_payload(in, static_cast<std::size_t>(w) * h);
  TensorD img({h, w});
  std::size_t k = 0;
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j) img(i, j) = bytes[k++] / 255.0;
  return img;
}

// ---------------- model checkpoints ----------------

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw FormatError("short write to " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_model(const fs::path& dir, const ModelParams<double>& params) {
  params.validate();
  fs::create_directories(dir);
  std::ostringstream manifest;
  const int n = params.num_layers();
  manifest << "layers = " << n << "\n";
  manifest << "sweeps = " << params.sweeps << "\n";
  for (int i = 0; i < n; ++i) {
    const auto tag = "layer" + std::to_string(i + 1);
    manifest << tag << ".step = " << format_double(params.step_sizes[i]) << "\n";
    manifest << tag << ".extrapolation = " << format_double(params.extrapolation[i]) << "\n";
    manifest << tag << ".alpha = " << format_double(params.layer_weights[i]) << "\n";
    write_tensor(dir / ("D" + std::to_string(i + 1) + ".mlct"), params.dicts[i].filters());
    TensorD bias({params.biases[i].size()});
    bias.flat() = params.biases[i];
    write_tensor(dir / ("b" + std::to_string(i + 1) + ".mlct"), bias);
  }
  write_text_file(dir / "manifest.txt", manifest.str());
}

ModelParams<double> load_model(const fs::path& dir) {
  const std::string text = read_text_file(dir / "manifest.txt");
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("manifest: missing '=' in line: " + line);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("manifest: missing key '" + key + "'");
    return it->second;
  };
  ModelParams<double> p;
  const int n = static_cast<int>(parse_double(need("layers")));
  p.sweeps = static_cast<int>(parse_double(need("sweeps")));
  for (int i = 0; i < n; ++i) {
    const auto tag = "layer" + std::to_string(i + 1);
    p.step_sizes.push_back(parse_double(need(tag + ".step")));
    p.extrapolation.push_back(parse_double(need(tag + ".extrapolation")));
    p.layer_weights.push_back(parse_double(need(tag + ".alpha")));
    p.dicts.emplace_back(read_tensor(dir / ("D" + std::to_string(i + 1) + ".mlct")));
    TensorD bias = read_tensor(dir / ("b" + std::to_string(i + 1) + ".mlct"));
    p.biases.push_back(bias.flat());
  }
  p.validate();
  return p;
}

}  // namespace mlcsc::io
