#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <opencv2/core.hpp>

namespace interleaf {

/// Loads an 8-bit RGB raster (stored BGR in memory, as OpenCV does).
/// Throws IoError when the file is missing or does not decode.
cv::Mat load_image(const std::filesystem::path& path);

/// PNG bytes for an 8-bit 3-channel image. Encoding is deterministic.
std::string encode_png(const cv::Mat& image);
cv::Mat decode_png(std::string_view bytes);

/// Writes PNG atomically.
void save_png(const cv::Mat& image, const std::filesystem::path& path);

std::string image_to_base64(const cv::Mat& image);
/// Throws ProtocolError when the payload is not a decodable image.
cv::Mat image_from_base64(std::string_view b64);

}  // namespace interleaf
