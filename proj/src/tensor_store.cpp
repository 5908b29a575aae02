#include "attnbound/tensor_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string_view>
#include <utility>

#include "attnbound/error.hpp"
#include "json.hpp"

namespace attnbound {
namespace {

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

constexpr std::array<unsigned char, 6> kMagic{0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreludeSize = 10;  // magic + version + header length
constexpr std::size_t kHeaderAlignment = 64;

// Minimal reader for the Python dict literal that NPY stores as its header.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  struct Header {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::size_t> shape;
  };

  Header parse() {
    Header header;
    bool have_descr = false, have_order = false, have_shape = false;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = parse_string();
      expect(':');
      if (key == "descr") {
        skip_ws();
        if (peek() != '\'' && peek() != '"') fail(ErrorKind::format, "NPY descr must be a string");
        header.descr = parse_string();
        have_descr = true;
      } else if (key == "fortran_order") {
        header.fortran_order = parse_bool();
        have_order = true;
      } else if (key == "shape") {
        header.shape = parse_shape();
        have_shape = true;
      } else {
        fail(ErrorKind::format, "unexpected NPY header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      break;
    }
    if (!have_descr || !have_order || !have_shape) fail(ErrorKind::format, "NPY header is missing a required key");
    return header;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(ErrorKind::format, std::string("malformed NPY header, expected '") + c + "'");
    ++pos_;
  }

  std::string parse_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail(ErrorKind::format, "malformed NPY header, expected a quoted string");
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) fail(ErrorKind::format, "unterminated string in NPY header");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  bool parse_bool() {
    skip_ws();
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail(ErrorKind::format, "malformed fortran_order in NPY header");
  }

  std::vector<std::size_t> parse_shape() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        break;
      }
      if (peek() < '0' || peek() > '9') fail(ErrorKind::format, "malformed shape in NPY header");
      std::size_t value = 0;
      while (peek() >= '0' && peek() <= '9') {
        const auto digit = static_cast<std::size_t>(peek() - '0');
        if (value > (std::size_t{1} << 48)) fail(ErrorKind::format, "NPY shape dimension too large");
        value = value * 10 + digit;
        ++pos_;
      }
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        fail(ErrorKind::format, "malformed shape in NPY header");
      }
    }
    return dims;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

void require_finite(const Matrix& m, std::string_view what) {
  if (auto bad = m.first_non_finite()) {
    const std::size_t r = *bad / std::max<std::size_t>(m.cols(), 1);
    const std::size_t c = *bad % std::max<std::size_t>(m.cols(), 1);
    fail(ErrorKind::data, std::string(what) + " holds a non-finite value at index " + std::to_string(*bad) + " (row " +
                              std::to_string(r) + ", col " + std::to_string(c) + ")");
  }
}

}  // namespace

Matrix parse_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < kPreludeSize) fail(ErrorKind::format, "file too short for an NPY prelude");
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (static_cast<unsigned char>(bytes[i]) != kMagic[i]) fail(ErrorKind::format, "missing NPY magic bytes");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    fail(ErrorKind::format, "unsupported NPY version " + std::to_string(major) + "." + std::to_string(minor));
  }
  const std::size_t header_len =
      static_cast<std::size_t>(static_cast<unsigned char>(bytes[8])) |
      (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreludeSize + header_len) fail(ErrorKind::format, "NPY header runs past end of file");

  const std::string_view header_text(reinterpret_cast<const char*>(bytes.data()) + kPreludeSize, header_len);
  const auto header = HeaderParser(header_text).parse();

  std::size_t item_size = 0;
  if (header.descr == "<f8") {
    item_size = 8;
  } else if (header.descr == "<f4") {
    item_size = 4;
  } else {
    fail(ErrorKind::unsupported_dtype, "element type '" + header.descr + "' is not little-endian float32/float64");
  }
  if (header.fortran_order) fail(ErrorKind::format, "Fortran-ordered arrays are not supported");

  std::size_t rows = 1, cols = 1;
  switch (header.shape.size()) {
    case 0: break;
    case 1: rows = header.shape[0]; break;
    case 2:
      rows = header.shape[0];
      cols = header.shape[1];
      break;
    default: fail(ErrorKind::format, "only 0-, 1- and 2-dimensional arrays are supported");
  }
  if (cols != 0 && rows > (std::size_t{1} << 40) / cols) fail(ErrorKind::format, "NPY shape too large");
  const std::size_t count = rows * cols;
  const std::size_t payload = bytes.size() - kPreludeSize - header_len;
  if (payload != count * item_size) {
    fail(ErrorKind::format, "payload holds " + std::to_string(payload) + " bytes but the shape needs " +
                                std::to_string(count * item_size));
  }

  std::vector<double> values(count);
  const std::byte* src = bytes.data() + kPreludeSize + header_len;
  if (item_size == 8) {
    std::memcpy(values.data(), src, count * 8);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, src + i * 4, 4);
      values[i] = static_cast<double>(f);
    }
  }
  Matrix m(rows, cols, std::move(values));
  require_finite(m, "tensor");
  return m;
}

std::vector<std::byte> encode_tensor(const Matrix& m) {
  require_finite(m, "tensor");
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                       std::to_string(m.cols()) + "), }";
  const std::size_t unpadded = kPreludeSize + header.size() + 1;
  const std::size_t padding = (kHeaderAlignment - unpadded % kHeaderAlignment) % kHeaderAlignment;
  header.append(padding, ' ');
  header.push_back('\n');

  std::vector<std::byte> out(kPreludeSize + header.size() + m.size() * 8);
  for (std::size_t i = 0; i < kMagic.size(); ++i) out[i] = static_cast<std::byte>(kMagic[i]);
  out[6] = std::byte{1};
  out[7] = std::byte{0};
  out[8] = static_cast<std::byte>(header.size() & 0xFF);
  out[9] = static_cast<std::byte>((header.size() >> 8) & 0xFF);
  std::memcpy(out.data() + kPreludeSize, header.data(), header.size());
  if (!m.empty()) std::memcpy(out.data() + kPreludeSize + header.size(), m.data().data(), m.size() * 8);
  return out;
}

Matrix read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_tensor(const Matrix& m, const std::filesystem::path& path) { write_file(path, encode_tensor(m)); }

// ---------------------------------------------------------------------------

const DumpEntry* DumpIndex::find(int layer, int head) const noexcept {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const DumpEntry& e) { return e.layer == layer && e.head == head; });
  return it == entries.end() ? nullptr : &*it;
}

namespace {

using nlohmann::json;

template <typename T>
T required_field(const json& doc, const char* key) {
  if (!doc.contains(key)) fail(ErrorKind::manifest, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::manifest, std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

std::filesystem::path checked_path(const std::filesystem::path& root, const std::string& rel) {
  const auto full = root / rel;
  if (!std::filesystem::exists(full)) fail(ErrorKind::missing_file, "referenced file not found: " + full.string());
  return rel;
}

}  // namespace

DumpIndex read_manifest(const std::filesystem::path& path) {
  std::filesystem::path file = path;
  if (std::filesystem::is_directory(path)) file = path / "manifest.json";
  if (!std::filesystem::exists(file)) fail(ErrorKind::missing_file, "manifest not found: " + file.string());

  std::ifstream in(file);
  if (!in) fail(ErrorKind::io, "cannot open '" + file.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::manifest, file.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::manifest, "manifest root must be an object");

  DumpIndex index;
  index.root = file.parent_path();
  index.model_id = required_field<std::string>(doc, "model_id");
  index.d_model = required_field<std::size_t>(doc, "d_model");
  index.n_layers = required_field<std::size_t>(doc, "n_layers");
  index.n_heads = required_field<std::size_t>(doc, "n_heads");
  index.seq_len = required_field<std::size_t>(doc, "seq_len");
  if (doc.contains("temperature") && !doc["temperature"].is_null()) {
    index.temperature = required_field<double>(doc, "temperature");
    if (!(*index.temperature > 0.0)) fail(ErrorKind::manifest, "temperature must be positive");
  }
  if (doc.contains("causal")) index.causal = required_field<bool>(doc, "causal");
  if (doc.contains("embeddings") && !doc["embeddings"].is_null()) {
    index.embeddings = checked_path(index.root, required_field<std::string>(doc, "embeddings"));
  }

  const auto entries = required_field<json>(doc, "entries");
  if (!entries.is_array()) fail(ErrorKind::manifest, "'entries' must be an array");
  std::set<std::pair<int, int>> seen;
  for (const auto& item : entries) {
    if (!item.is_object()) fail(ErrorKind::manifest, "every entry must be an object");
    DumpEntry entry;
    entry.layer = required_field<int>(item, "layer");
    entry.head = required_field<int>(item, "head");
    if (entry.layer < 0 || entry.head < 0) fail(ErrorKind::manifest, "layer and head must be non-negative");
    if (!seen.emplace(entry.layer, entry.head).second) {
      fail(ErrorKind::manifest, "duplicate entry for layer " + std::to_string(entry.layer) + ", head " +
                                    std::to_string(entry.head));
    }
    entry.q = checked_path(index.root, required_field<std::string>(item, "q"));
    entry.k = checked_path(index.root, required_field<std::string>(item, "k"));
    entry.v = checked_path(index.root, required_field<std::string>(item, "v"));
    if (item.contains("attn") && !item["attn"].is_null()) {
      entry.attention = checked_path(index.root, required_field<std::string>(item, "attn"));
    }
    index.entries.push_back(std::move(entry));
  }
  return index;
}

void write_manifest(const DumpIndex& index) {
  json doc;
  doc["model_id"] = index.model_id;
  doc["d_model"] = index.d_model;
  doc["n_layers"] = index.n_layers;
  doc["n_heads"] = index.n_heads;
  doc["seq_len"] = index.seq_len;
  doc["temperature"] = index.temperature ? json(*index.temperature) : json(nullptr);
  doc["causal"] = index.causal;
  if (index.embeddings) doc["embeddings"] = index.embeddings->generic_string();
  doc["entries"] = json::array();
  for (const auto& e : index.entries) {
    json item{{"layer", e.layer}, {"head", e.head}, {"q", e.q.generic_string()}, {"k", e.k.generic_string()},
              {"v", e.v.generic_string()}};
    if (e.attention) item["attn"] = e.attention->generic_string();
    doc["entries"].push_back(std::move(item));
  }
  const std::string text = doc.dump(2) + "\n";
  write_file(index.root / "manifest.json",
             std::span(reinterpret_cast<const std::byte*>(text.data()), text.size()));
}

void validate(const HeadDump& dump) {
  const std::size_t L = dump.q.rows();
  const std::size_t d = dump.q.cols();
  const auto where = "layer " + std::to_string(dump.layer) + ", head " + std::to_string(dump.head);
  if (L == 0 || d == 0) fail(ErrorKind::dimension, where + ": empty Q");
  if (dump.k.rows() != L || dump.k.cols() != d || dump.v.rows() != L || dump.v.cols() != d) {
    fail(ErrorKind::dimension, where + ": Q, K, V must all be " + std::to_string(L) + "x" + std::to_string(d));
  }
  if (dump.seq_len != L || dump.head_dim != d) fail(ErrorKind::dimension, where + ": recorded shape disagrees with Q");
  if (!(dump.temperature > 0.0) || !std::isfinite(dump.temperature)) {
    fail(ErrorKind::range, where + ": temperature must be positive");
  }
  if (dump.attention) {
    const auto& a = *dump.attention;
    if (a.rows() != L || a.cols() != L) fail(ErrorKind::dimension, where + ": attention must be LxL");
    for (std::size_t r = 0; r < L; ++r) {
      double sum = 0.0;
      for (double w : a.row(r)) {
        if (w < 0.0) fail(ErrorKind::data, where + ": negative attention weight in row " + std::to_string(r));
        sum += w;
      }
      if (std::fabs(sum - 1.0) > 1e-6) {
        fail(ErrorKind::data, where + ": attention row " + std::to_string(r) + " sums to " + std::to_string(sum));
      }
    }
  }
  if (dump.embeddings && dump.embeddings->rows() != L) {
    fail(ErrorKind::dimension, where + ": embeddings must have " + std::to_string(L) + " rows");
  }
}

std::optional<Matrix> load_embeddings(const DumpIndex& index) {
  if (!index.embeddings) return std::nullopt;
  return read_tensor(index.root / *index.embeddings);
}

HeadDump load_head(const DumpIndex& index, const DumpEntry& entry, const std::optional<Matrix>& embeddings) {
  HeadDump dump;
  dump.model_id = index.model_id;
  dump.layer = entry.layer;
  dump.head = entry.head;
  dump.q = read_tensor(index.root / entry.q);
  dump.k = read_tensor(index.root / entry.k);
  dump.v = read_tensor(index.root / entry.v);
  if (entry.attention) dump.attention = read_tensor(index.root / *entry.attention);
  dump.embeddings = embeddings;
  dump.seq_len = dump.q.rows();
  dump.head_dim = dump.q.cols();
  dump.temperature = index.temperature.value_or(std::sqrt(static_cast<double>(dump.head_dim)));
  dump.causal = index.causal;
  validate(dump);
  return dump;
}

}  // namespace attnbound
