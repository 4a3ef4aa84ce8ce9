#include "eataudit/embedding_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>
#include <variant>

#include <json.hpp>

#include "eataudit/error.hpp"

namespace eataudit {

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim,
                                 DType dtype, std::vector<double> data)
    : rows_(rows), dim_(dim), dtype_(dtype), data_(std::move(data)) {
  if (rows_ == 0 || dim_ == 0) {
    throw DataError("embedding matrix must have at least one row and column");
  }
  if (dim_ > std::numeric_limits<std::size_t>::max() / rows_ ||
      data_.size() != rows_ * dim_) {
    throw DataError("embedding matrix data length " +
                    std::to_string(data_.size()) + " does not match shape (" +
                    std::to_string(rows_) + ", " + std::to_string(dim_) + ")");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw DataError("embedding matrix has a non-finite value at row " +
                      std::to_string(i / dim_) + ", column " +
                      std::to_string(i % dim_));
    }
  }
}

std::span<const double> EmbeddingMatrix::row(std::size_t i) const {
  if (i >= rows_) {
    throw DataError("row index " + std::to_string(i) + " out of range (" +
                    std::to_string(rows_) + " rows)");
  }
  return std::span<const double>(data_).subspan(i * dim_, dim_);
}

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kAlign = 64;

// Values that can appear in a NPY header dictionary.
using HeaderValue =
    std::variant<std::string, bool, std::vector<std::uint64_t>>;

// Recursive-descent reader for the Python literal subset NPY headers use:
// a dict of quoted-string keys mapping to strings, True/False or int tuples.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  std::unordered_map<std::string, HeaderValue> parse_dict() {
    std::unordered_map<std::string, HeaderValue> out;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      std::string key = parse_string();
      expect(':');
      out[key] = parse_value();
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() == '}') {
        ++pos_;
        break;
      } else {
        fail("expected ',' or '}'");
      }
    }
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after dictionary");
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("npy: malformed header (" + what + " at offset " +
                    std::to_string(pos_) + ")");
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string parse_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected quoted string");
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string s(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }

  HeaderValue parse_value() {
    skip_ws();
    const char c = peek();
    if (c == '\'' || c == '"') return parse_string();
    if (c == '(') return parse_tuple();
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail("unsupported value");
  }

  std::vector<std::uint64_t> parse_tuple() {
    expect('(');
    std::vector<std::uint64_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) {
        fail("expected integer in shape");
      }
      std::uint64_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        const std::uint64_t digit = static_cast<std::uint64_t>(peek() - '0');
        if (v > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) {
          fail("shape dimension overflows");
        }
        v = v * 10 + digit;
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        fail("expected ',' or ')' in shape");
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

template <typename T>
const T& header_field(const std::unordered_map<std::string, HeaderValue>& h,
                      const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw DataError("npy: header is missing '" + key + "'");
  const T* v = std::get_if<T>(&it->second);
  if (!v) throw DataError("npy: header field '" + key + "' has wrong type");
  return *v;
}

std::uint64_t read_le(const std::uint8_t* p, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return v;
}

void append_le(std::vector<std::uint8_t>& out, std::uint64_t v,
               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

}  // namespace

EmbeddingMatrix parse_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 || !std::equal(std::begin(kMagic), std::end(kMagic),
                                       bytes.begin())) {
    throw DataError("npy: bad magic string");
  }
  const std::uint8_t major = bytes[6];
  std::size_t header_len = 0;
  std::size_t header_start = 0;
  if (major == 1) {
    header_len = read_le(bytes.data() + 8, 2);
    header_start = 10;
  } else if (major == 2) {
    if (bytes.size() < 12) throw DataError("npy: truncated preamble");
    header_len = read_le(bytes.data() + 8, 4);
    header_start = 12;
  } else {
    throw DataError("npy: unsupported format version " +
                    std::to_string(major) + "." + std::to_string(bytes[7]));
  }
  if (bytes.size() < header_start + header_len) {
    throw DataError("npy: truncated header");
  }
  const std::string_view header(
      reinterpret_cast<const char*>(bytes.data() + header_start), header_len);
  const auto dict = HeaderParser(header).parse_dict();

  const auto& descr = header_field<std::string>(dict, "descr");
  DType dtype;
  std::size_t width;
  if (descr == "<f4") {
    dtype = DType::float32;
    width = 4;
  } else if (descr == "<f8") {
    dtype = DType::float64;
    width = 8;
  } else {
    throw DataError("npy: unsupported dtype '" + descr +
                    "' (only little-endian float32 '<f4' and float64 '<f8')");
  }
  if (header_field<bool>(dict, "fortran_order")) {
    throw DataError(
        "npy: fortran_order arrays are not supported; save the array in C "
        "order");
  }
  const auto& shape = header_field<std::vector<std::uint64_t>>(dict, "shape");
  if (shape.size() != 2) {
    throw DataError("npy: expected a 2-dimensional array, got " +
                    std::to_string(shape.size()) + " dimensions");
  }
  const std::uint64_t rows = shape[0];
  const std::uint64_t dim = shape[1];
  if (rows == 0 || dim == 0) {
    throw DataError("npy: array shape must be non-empty");
  }
  const std::size_t payload_start = header_start + header_len;
  const std::size_t available = (bytes.size() - payload_start) / width;
  if (rows > available || dim > available / rows) {
    throw DataError("npy: truncated payload: shape (" + std::to_string(rows) +
                    ", " + std::to_string(dim) + ") needs " +
                    std::to_string(rows * dim) + " values, file holds " +
                    std::to_string(available));
  }

  const std::size_t count = rows * dim;
  std::vector<double> data(count);
  const std::uint8_t* p = bytes.data() + payload_start;
  for (std::size_t i = 0; i < count; ++i, p += width) {
    if (dtype == DType::float32) {
      data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(read_le(p, 4)));
    } else {
      data[i] = std::bit_cast<double>(read_le(p, 8));
    }
  }
  return EmbeddingMatrix(rows, dim, dtype, std::move(data));
}

EmbeddingMatrix parse_npy(std::string_view bytes) {
  return parse_npy(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::vector<std::uint8_t> write_npy(const EmbeddingMatrix& matrix) {
  const bool f32 = matrix.dtype() == DType::float32;
  std::string header = std::string("{'descr': '") + (f32 ? "<f4" : "<f8") +
                       "', 'fortran_order': False, 'shape': (" +
                       std::to_string(matrix.rows()) + ", " +
                       std::to_string(matrix.dim()) + "), }";
  // 10 preamble bytes + header + padding + '\n' is a multiple of 64.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((kAlign - unpadded % kAlign) % kAlign, ' ');
  header.push_back('\n');

  const std::size_t width = f32 ? 4 : 8;
  std::vector<std::uint8_t> out;
  out.reserve(10 + header.size() + matrix.data().size() * width);
  for (std::uint8_t b : kMagic) out.push_back(b);
  out.push_back(1);
  out.push_back(0);
  append_le(out, header.size(), 2);
  for (char c : header) out.push_back(static_cast<std::uint8_t>(c));
  for (double v : matrix.data()) {
    if (f32) {
      append_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
    } else {
      append_le(out, std::bit_cast<std::uint64_t>(v), 8);
    }
  }
  return out;
}

EmbeddingMatrix load_npy(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    return parse_npy(std::string_view(bytes));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_npy(const std::string& path, const EmbeddingMatrix& matrix) {
  const auto bytes = write_npy(matrix);
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                    bytes.size()));
}

Manifest::Manifest(std::vector<ManifestEntry> entries)
    : entries_(std::move(entries)) {
  std::unordered_map<std::string_view, const ManifestEntry*> by_id;
  std::unordered_map<std::size_t, const ManifestEntry*> by_row;
  auto where = [](const ManifestEntry& e) {
    return e.line ? "line " + std::to_string(e.line) : std::string("entry");
  };
  for (const auto& e : entries_) {
    if (e.id.empty()) throw DataError("manifest " + where(e) + ": empty id");
    if (e.group.empty()) {
      throw DataError("manifest " + where(e) + ": entry '" + e.id +
                      "' has an empty group tag");
    }
    if (auto [it, fresh] = by_id.emplace(e.id, &e); !fresh) {
      throw DataError("manifest: duplicate id '" + e.id + "' on " +
                      where(*it->second) + " and " + where(e));
    }
    if (auto [it, fresh] = by_row.emplace(e.row, &e); !fresh) {
      throw DataError("manifest: row " + std::to_string(e.row) +
                      " is bound to both '" + it->second->id + "' and '" +
                      e.id + "'");
    }
  }
}

const ManifestEntry* Manifest::find(std::string_view id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

Manifest parse_manifest_jsonl(std::string_view text) {
  using nlohmann::json;
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      continue;
    }
    const std::string at = "manifest line " + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(at + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(at + "expected a JSON object");

    ManifestEntry e;
    e.line = line_no;
    try {
      e.id = j.at("id").get<std::string>();
      e.group = j.at("group").get<std::string>();
      const auto& row = j.at("row");
      if (!row.is_number_integer() || row.get<std::int64_t>() < 0) {
        throw DataError(at + "'row' must be a non-negative integer");
      }
      e.row = row.get<std::size_t>();
      const auto kind = j.value("kind", std::string("image"));
      if (kind == "image") {
        e.kind = EntryKind::image;
      } else if (kind == "text") {
        e.kind = EntryKind::text;
      } else {
        throw DataError(at + "unknown kind '" + kind + "'");
      }
      if (j.contains("text") && !j["text"].is_null()) {
        e.text = j["text"].get<std::string>();
      }
      if (j.contains("meta") && j["meta"].is_object()) {
        for (const auto& [k, v] : j["meta"].items()) {
          e.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
    } catch (const json::exception& ex) {
      throw DataError(at + "bad field (" + ex.what() + ")");
    }
    entries.push_back(std::move(e));
    if (nl == text.size()) break;
  }
  return Manifest(std::move(entries));
}

std::vector<std::size_t> Dataset::rows_in_group(std::string_view group) const {
  std::vector<std::size_t> rows;
  for (const auto& e : manifest.entries()) {
    if (e.group == group) rows.push_back(e.row);
  }
  return rows;
}

Dataset make_dataset(EmbeddingMatrix matrix, Manifest manifest) {
  for (const auto& e : manifest.entries()) {
    if (e.row >= matrix.rows()) {
      throw DataError("manifest entry '" + e.id + "' references row " +
                      std::to_string(e.row) + " but the matrix has " +
                      std::to_string(matrix.rows()) + " rows");
    }
  }
  return Dataset{std::move(matrix), std::move(manifest)};
}

Dataset load_dataset(const std::string& matrix_path,
                     const std::string& manifest_path) {
  auto matrix = load_npy(matrix_path);
  const std::string text = read_file(manifest_path);
  try {
    return make_dataset(std::move(matrix), parse_manifest_jsonl(text));
  } catch (const DataError& e) {
    throw DataError(manifest_path + ": " + e.what());
  }
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DataError("cosine: dimension mismatch (" + std::to_string(u.size()) +
                    " vs " + std::to_string(v.size()) + ")");
  }
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    throw DataError("cosine: zero-norm vector");
  }
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

}  // namespace eataudit
