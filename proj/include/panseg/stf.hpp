#pragma once

// STF ("simple tensor format") binary I/O, little-endian:
//   magic "STF1" | u8 dtype (0=u8,1=u16,2=u32,3=f32) | u8 semantic tag
//   | u16 reserved(0) | u32 height | u32 width | u32 channels
//   | row-major H*W*C payload.
// Semantic tags: 0=semantic_probs, 1=labels, 2=contour_probs, 3=contour_mask,
// 4=offsets, 5=instance_ids, 6=panoptic_encoded.
//
// PGM (binary P5, maxval 255 or 65535) import/export is provided for
// single-channel integer maps so intermediates stay human-inspectable.

#include <filesystem>
#include <string>

#include "panseg/types.hpp"

namespace panseg::stf {

enum class Dtype : uint8_t { U8 = 0, U16 = 1, U32 = 2, F32 = 3 };
enum class Tag : uint8_t {
    SemanticProbs = 0,
    Labels = 1,
    ContourProbs = 2,
    ContourMask = 3,
    Offsets = 4,
    InstanceIds = 5,
    PanopticEncoded = 6,
};

struct Header {
    Dtype dtype;
    Tag tag;
    uint32_t height, width, channels;
};

/// Reads just the header; used by the CLI to dispatch on tensor type.
Header peek(const std::filesystem::path& path);

void write_tensor(const SemanticProbMap& m, const std::filesystem::path& path);
void write_tensor(const SemanticLabelMap& m, const std::filesystem::path& path);
void write_tensor(const ContourProbMap& m, const std::filesystem::path& path);
void write_tensor(const BinaryMask& m, const std::filesystem::path& path);
void write_tensor(const OffsetField& m, const std::filesystem::path& path);
/// Writes the id raster only; records travel in a JSON sidecar.
void write_tensor(const InstanceLabelMap& m, const std::filesystem::path& path);
void write_tensor(const PanopticMap& m, const std::filesystem::path& path);

// Readers validate invariants and throw ValidationError naming the first
// offending pixel; FormatError on header/dtype/tag mismatches.
SemanticProbMap read_semantic_probs(const std::filesystem::path& path);
SemanticLabelMap read_labels(const std::filesystem::path& path);
ContourProbMap read_contour_probs(const std::filesystem::path& path);
BinaryMask read_contour_mask(const std::filesystem::path& path);
OffsetField read_offsets(const std::filesystem::path& path);
/// Records are rebuilt with geometry only (class/confidence defaulted);
/// pair with read_records for full records.
InstanceLabelMap read_instances(const std::filesystem::path& path);
PanopticMap read_panoptic(const std::filesystem::path& path);

// JSON sidecar for instance records.
void write_records(const InstanceLabelMap& m, const std::filesystem::path& path);
void read_records(InstanceLabelMap& m, const std::filesystem::path& path);

// Catalog JSON: {"classes":[{"id":0,"name":"road","is_thing":false},...]}
void write_catalog(const ClassCatalog& catalog, const std::filesystem::path& path);
ClassCatalog read_catalog(const std::filesystem::path& path);

// PGM / PPM debug emitters.
void write_pgm(const SemanticLabelMap& m, const std::filesystem::path& path);
void write_pgm(const BinaryMask& m, const std::filesystem::path& path);
void write_pgm(const InstanceLabelMap& m, const std::filesystem::path& path);
SemanticLabelMap read_pgm(const std::filesystem::path& path);
/// Fixed deterministic color table keyed on the encoded panoptic id.
void write_debug_ppm(const PanopticMap& m, const std::filesystem::path& path);

}  // namespace panseg::stf
