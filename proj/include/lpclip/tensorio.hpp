// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Embedding store wire format (`*.lpce`) and view-group directories.
///
/// Layout, all integers little-endian:
///
///   offset  size  field
///        0     4  magic "LPCE"
///        4     2  version (1)
///        6     1  dtype code (1 = float32 LE)
///        7     1  flags (bit 0: every row unit-norm within 1e-4)
///        8     8  N (rows)
///       16     8  D (cols)
///       24  N*D*4 payload, row-major
///
/// Each store has a JSON sidecar `<basename>.manifest.json`. A view group is
/// a directory holding `weak.lpce`, `strong_0.lpce` ... `strong_{K-1}.lpce`
/// and a shared `group.manifest.json`.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpclip/matrix.hpp"

namespace lpclip::tensorio {

inline constexpr std::array<char, 4> kMagic{'L', 'P', 'C', 'E'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::uint8_t kFlagUnitNorm = 0x01;
inline constexpr std::size_t kHeaderBytes = 24;
inline constexpr double kUnitNormTolerance = 1e-4;

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoreHeader {
  std::uint16_t version = kVersion;
  std::uint8_t dtype = kDtypeFloat32;
  std::uint8_t flags = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;

  bool unit_norm() const noexcept { return (flags & kFlagUnitNorm) != 0; }
};

/// Shape record for probe checkpoints stored as 1 x (C*D + C) rows.
struct ProbeShape {
  std::size_t classes = 0;
  std::size_t dim = 0;
  bool bias = true;

  friend bool operator==(const ProbeShape&, const ProbeShape&) = default;
};

struct Manifest {
  std::vector<std::string> class_names;
  /// Length N, -1 = unknown.
  std::optional<std::vector<std::int64_t>> labels;
  std::optional<std::string> view_group;
  std::string source;
  /// Set on prompt-bank stores: rows are ordered class-major, `prompt_count` per class.
  std::optional<std::size_t> prompt_count;
  std::vector<std::string> prompt_texts;
  std::optional<ProbeShape> probe;
  /// Fields this library does not interpret; preserved on round trip.
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& doc);

struct EmbeddingStore {
  StoreHeader header;
  MatrixF matrix;
  Manifest manifest;

  std::size_t rows() const noexcept { return matrix.rows(); }
  std::size_t cols() const noexcept { return matrix.cols(); }
  bool unit_norm() const noexcept { return header.unit_norm(); }
};

/// `dir/weak.lpce` -> `dir/weak.manifest.json`.
std::filesystem::path manifest_path(const std::filesystem::path& store_path);

bool rows_unit_norm(const MatrixF& matrix, double tolerance = kUnitNormTolerance);

/// Serialized bytes of a store (header + payload); the unit-norm flag is
/// derived from the data.
std::vector<std::uint8_t> encode_store(const MatrixF& matrix);

/// Writes the store and its sidecar. Rejects non-finite payloads and
/// manifests whose label array length differs from N.
void write_store(const MatrixF& matrix, const Manifest& manifest,
                 const std::filesystem::path& path);

/// Reads and validates only the 24-byte header, checking the declared shape
/// against the file size.
StoreHeader read_header(const std::filesystem::path& path);

/// Reads a store; a missing sidecar yields an empty manifest.
EmbeddingStore read_store(const std::filesystem::path& path);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// View groups

inline constexpr const char* kWeakStoreName = "weak.lpce";
inline constexpr const char* kGroupManifestName = "group.manifest.json";
std::string strong_store_name(std::size_t index);

struct ViewGroup {
  EmbeddingStore weak;
  std::vector<EmbeddingStore> strong;
  Manifest manifest;

  std::size_t views() const noexcept { return strong.size(); }
  std::size_t samples() const noexcept { return weak.rows(); }
  std::size_t dim() const noexcept { return weak.cols(); }
};

struct MemberInfo {
  std::string file;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  bool unit_norm = false;
};

struct ValidationReport {
  bool valid = false;
  std::size_t views = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<MemberInfo> members;
  std::vector<std::string> issues;
};

nlohmann::json report_to_json(const ValidationReport& report);

/// Inspects headers only; inconsistencies are reported, not thrown.
ValidationReport validate_view_group(const std::filesystem::path& dir);

void write_view_group(const std::filesystem::path& dir, const MatrixF& weak,
                      std::span<const MatrixF> strong, const Manifest& manifest);

/// Loads a group, throwing StoreError when validate_view_group rejects it.
ViewGroup read_view_group(const std::filesystem::path& dir);

}  // namespace lpclip::tensorio
