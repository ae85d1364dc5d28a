#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "schemex/model.hpp"

namespace schemex {

inline constexpr char kModelMagic[6] = {'G', 'L', 'N', 'R', '2', '\0'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

/// Layout: magic "GLNR2\0", u16 format version, u64 header length, JSON
/// header (config, vocabulary, tensor manifest with shape/dtype/offset),
/// then raw little-endian f64 payloads in manifest order. All integers
/// little-endian.
void save_model(const Model& model, const std::filesystem::path& path);

/// Throws ModelFileError: FileError, BadMagic, VersionMismatch,
/// TruncatedFile, CorruptHeader, ShapeMismatch, NonFiniteTensor.
Model load_model(const std::filesystem::path& path);

/// Hex SHA-256 of the file contents; identical files share an id.
std::string model_file_id(const std::filesystem::path& path);

}  // namespace schemex
