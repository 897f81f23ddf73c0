// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "lpclip/tensorio.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace lpclip::tensorio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* in, int bytes) {
  std::uint64_t value = 0;
  for (int i = 0; i < bytes; ++i) value |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return value;
}

const std::set<std::string>& known_manifest_keys() {
  static const std::set<std::string> keys{"class_names", "labels",       "view_group", "source",
                                          "prompt_count", "prompt_texts", "probe"};
  return keys;
}

}  // namespace

json manifest_to_json(const Manifest& manifest) {
  json doc = manifest.extra.is_object() ? manifest.extra : json::object();
  doc["class_names"] = manifest.class_names;
  if (manifest.labels) doc["labels"] = *manifest.labels;
  if (manifest.view_group) doc["view_group"] = *manifest.view_group;
  doc["source"] = manifest.source;
  if (manifest.prompt_count) doc["prompt_count"] = *manifest.prompt_count;
  if (!manifest.prompt_texts.empty()) doc["prompt_texts"] = manifest.prompt_texts;
  if (manifest.probe) {
    doc["probe"] = {{"C", manifest.probe->classes},
                    {"D", manifest.probe->dim},
                    {"bias", manifest.probe->bias}};
  }
  return doc;
}

Manifest manifest_from_json(const json& doc) {
  if (!doc.is_object()) throw StoreError("manifest must be a JSON object");
  Manifest m;
  try {
    if (doc.contains("class_names")) m.class_names = doc.at("class_names").get<std::vector<std::string>>();
    if (doc.contains("labels") && !doc.at("labels").is_null()) {
      m.labels = doc.at("labels").get<std::vector<std::int64_t>>();
    }
    if (doc.contains("view_group") && !doc.at("view_group").is_null()) {
      m.view_group = doc.at("view_group").get<std::string>();
    }
    if (doc.contains("source")) m.source = doc.at("source").get<std::string>();
    if (doc.contains("prompt_count")) m.prompt_count = doc.at("prompt_count").get<std::size_t>();
    if (doc.contains("prompt_texts")) {
      m.prompt_texts = doc.at("prompt_texts").get<std::vector<std::string>>();
    }
    if (doc.contains("probe")) {
      const json& p = doc.at("probe");
      m.probe = ProbeShape{p.at("C").get<std::size_t>(), p.at("D").get<std::size_t>(),
                           p.value("bias", true)};
    }
  } catch (const json::exception& e) {
    throw StoreError(std::string("malformed manifest: ") + e.what());
  }
  for (const auto& [key, value] : doc.items()) {
    if (!known_manifest_keys().contains(key)) m.extra[key] = value;
  }
  if (m.labels && !m.class_names.empty()) {
    const auto classes = static_cast<std::int64_t>(m.class_names.size());
    for (std::int64_t label : *m.labels) {
      if (label < -1 || label >= classes) {
        throw StoreError("manifest label " + std::to_string(label) + " outside [-1, " +
                         std::to_string(classes - 1) + "]");
      }
    }
  }
  return m;
}

fs::path manifest_path(const fs::path& store_path) {
  fs::path p = store_path;
  p.replace_extension(".manifest.json");
  return p;
}

bool rows_unit_norm(const MatrixF& matrix, double tolerance) {
  if (matrix.rows() == 0) return false;
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    double sq = 0.0;
    for (float v : matrix.row(r)) sq += static_cast<double>(v) * v;
    if (std::fabs(std::sqrt(sq) - 1.0) > tolerance) return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_store(const MatrixF& matrix) {
  for (float v : matrix.values()) {
    if (!std::isfinite(v)) throw StoreError("non-finite payload");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + matrix.size() * 4);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_le(out, kVersion, 2);
  put_le(out, kDtypeFloat32, 1);
  put_le(out, rows_unit_norm(matrix) ? kFlagUnitNorm : 0, 1);
  put_le(out, matrix.rows(), 8);
  put_le(out, matrix.cols(), 8);
  for (float v : matrix.values()) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StoreError("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw StoreError("write failed: " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StoreError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw StoreError(path.string() + ": " + e.what());
  }
  return manifest_from_json(doc);
}

void write_store(const MatrixF& matrix, const Manifest& manifest, const fs::path& path) {
  if (manifest.labels && manifest.labels->size() != matrix.rows()) {
    throw StoreError("manifest has " + std::to_string(manifest.labels->size()) +
                     " labels for " + std::to_string(matrix.rows()) + " rows");
  }
  const std::vector<std::uint8_t> bytes = encode_store(matrix);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StoreError("write failed: " + path.string());
  }
  write_manifest(manifest, manifest_path(path));
}

StoreHeader read_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open " + path.string());
  std::array<std::uint8_t, kHeaderBytes> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (in.gcount() < 4 || !std::equal(kMagic.begin(), kMagic.end(), raw.begin())) {
    throw StoreError("not an embedding store: " + path.string());
  }
  if (static_cast<std::size_t>(in.gcount()) < kHeaderBytes) {
    throw StoreError("truncated header: " + path.string());
  }
  StoreHeader h;
  h.version = static_cast<std::uint16_t>(get_le(raw.data() + 4, 2));
  h.dtype = raw[6];
  h.flags = raw[7];
  h.rows = get_le(raw.data() + 8, 8);
  h.cols = get_le(raw.data() + 16, 8);
  if (h.version != kVersion) {
    throw StoreError("unsupported version " + std::to_string(h.version) + ": " + path.string());
  }
  if (h.dtype != kDtypeFloat32) {
    throw StoreError("unsupported dtype " + std::to_string(h.dtype) + ": " + path.string());
  }
  const std::uint64_t file_bytes = fs::file_size(path);
  const std::uint64_t max_values = (std::numeric_limits<std::uint64_t>::max() - kHeaderBytes) / 4;
  const bool overflow = h.cols != 0 && h.rows > max_values / h.cols;
  if (overflow || file_bytes != kHeaderBytes + h.rows * h.cols * 4) {
    throw StoreError("truncated payload: " + path.string() + " declares " +
                     std::to_string(h.rows) + "x" + std::to_string(h.cols) + " but holds " +
                     std::to_string(file_bytes) + " bytes");
  }
  return h;
}

EmbeddingStore read_store(const fs::path& path) {
  EmbeddingStore store;
  store.header = read_header(path);
  const std::size_t count = store.header.rows * store.header.cols;
  std::vector<std::uint8_t> raw(count * 4);
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(kHeaderBytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw StoreError("truncated payload: " + path.string());
  }
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(raw.data() + 4 * i, 4)));
  }
  store.matrix = MatrixF(store.header.rows, store.header.cols, std::move(values));
  const fs::path sidecar = manifest_path(path);
  if (fs::exists(sidecar)) store.manifest = read_manifest(sidecar);
  if (store.manifest.labels && store.manifest.labels->size() != store.rows()) {
    throw StoreError("manifest label count does not match rows: " + sidecar.string());
  }
  return store;
}

std::string strong_store_name(std::size_t index) {
  return "strong_" + std::to_string(index) + ".lpce";
}

json report_to_json(const ValidationReport& report) {
  json members = json::array();
  for (const MemberInfo& m : report.members) {
    members.push_back(
        {{"file", m.file}, {"rows", m.rows}, {"cols", m.cols}, {"unit_norm", m.unit_norm}});
  }
  return {{"valid", report.valid}, {"views", report.views},   {"rows", report.rows},
          {"cols", report.cols},   {"members", members},     {"issues", report.issues}};
}

ValidationReport validate_view_group(const fs::path& dir) {
  ValidationReport report;
  auto inspect = [&](const fs::path& path) -> std::optional<MemberInfo> {
    try {
      const StoreHeader h = read_header(path);
      return MemberInfo{path.filename().string(), h.rows, h.cols, h.unit_norm()};
    } catch (const std::exception& e) {
      report.issues.push_back(e.what());
      return std::nullopt;
    }
  };

  const fs::path weak = dir / kWeakStoreName;
  if (!fs::is_regular_file(weak)) {
    report.issues.push_back("missing weak store");
    return report;
  }
  if (auto info = inspect(weak)) report.members.push_back(*info);

  for (std::size_t k = 0;; ++k) {
    const fs::path strong = dir / strong_store_name(k);
    if (!fs::is_regular_file(strong)) break;
    ++report.views;
    if (auto info = inspect(strong)) report.members.push_back(*info);
  }
  // A gap in the strong_* numbering leaves orphaned views behind.
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("strong_") && entry.path().extension() == ".lpce") {
      const std::string digits = name.substr(7, name.size() - 7 - 5);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos ||
          std::stoull(digits) >= report.views) {
        report.issues.push_back("strong view out of sequence: " + name);
      }
    }
  }

  if (!report.members.empty()) {
    report.rows = report.members.front().rows;
    report.cols = report.members.front().cols;
    for (const MemberInfo& m : report.members) {
      if (m.cols != report.cols) {
        report.issues.push_back("dimension mismatch: " + m.file + " has D=" +
                                std::to_string(m.cols) + ", expected " +
                                std::to_string(report.cols));
      }
      if (m.rows != report.rows) {
        report.issues.push_back("sample count mismatch: " + m.file + " has N=" +
                                std::to_string(m.rows) + ", expected " +
                                std::to_string(report.rows));
      }
    }
  }
  report.valid = report.issues.empty();
  return report;
}

void write_view_group(const fs::path& dir, const MatrixF& weak, std::span<const MatrixF> strong,
                      const Manifest& manifest) {
  fs::create_directories(dir);
  for (const MatrixF& view : strong) {
    if (view.rows() != weak.rows() || view.cols() != weak.cols()) {
      throw StoreError("strong view shape differs from weak view");
    }
  }
  write_store(weak, manifest, dir / kWeakStoreName);
  for (std::size_t k = 0; k < strong.size(); ++k) {
    write_store(strong[k], manifest, dir / strong_store_name(k));
  }
  Manifest group = manifest;
  group.extra["views"] = strong.size();
  write_manifest(group, dir / kGroupManifestName);
}

ViewGroup read_view_group(const fs::path& dir) {
  const ValidationReport report = validate_view_group(dir);
  if (!report.valid) {
    std::string msg = "invalid view group " + dir.string() + ":";
    for (const std::string& issue : report.issues) msg += " " + issue + ";";
    throw StoreError(msg);
  }
  ViewGroup group;
  group.weak = read_store(dir / kWeakStoreName);
  for (std::size_t k = 0; k < report.views; ++k) {
    group.strong.push_back(read_store(dir / strong_store_name(k)));
  }
  const fs::path shared = dir / kGroupManifestName;
  group.manifest = fs::exists(shared) ? read_manifest(shared) : group.weak.manifest;
  if (group.manifest.labels && group.manifest.labels->size() != group.samples()) {
    throw StoreError("group manifest label count does not match N");
  }
  return group;
}

}  // namespace lpclip::tensorio
