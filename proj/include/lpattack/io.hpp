#ifndef LPATTACK_IO_HPP
#define LPATTACK_IO_HPP

#include <filesystem>
#include <string>

#include "lpattack/model.hpp"
#include "lpattack/types.hpp"

namespace lpattack {

// Writes to <path>.tmp then renames, so readers never see partial files.
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

// Model files are JSON:
//   {"classes": M, "input_shape": [C,H,W],
//    "layers": [{"activation": "...", "rows": r, "cols": c,
//                "weight": [row-major], "bias": [...]}, ...]}
// Doubles are serialized with round-trip precision, so save/load is
// bit-exact on weights.
void save_model(const Classifier& model, const std::filesystem::path& path);
Classifier load_model(const std::filesystem::path& path);

// Image files are text: "IMGF C H W" then C*H*W floats in [0,1].
void save_image(const Image& img, const std::filesystem::path& path);
Image load_image(const std::filesystem::path& path);

}  // namespace lpattack

#endif
