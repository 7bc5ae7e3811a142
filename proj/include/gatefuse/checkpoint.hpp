#pragma once

#include <filesystem>

#include "gatefuse/fusion.hpp"

namespace gatefuse {

// Model files: one JSON header line describing the architecture and every
// parameter tensor's shape, then the parameter values as little-endian
// float64 in header order.
void save_classifier(const EncoderClassifier& model, const std::filesystem::path& path);
EncoderClassifier load_classifier(const std::filesystem::path& path);

// Stores the new model, gate and temperature. The old model lives in its own
// file; load_gated_fusion attaches whatever old model the caller passes.
void save_gated_fusion(const GatedFusionModel& gf, const std::filesystem::path& path);
GatedFusionModel load_gated_fusion(const std::filesystem::path& path,
                                   std::shared_ptr<const EncoderClassifier> old_model = nullptr);

}  // namespace gatefuse
