#include "interleaf/image_io.hpp"

#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"

namespace interleaf {

cv::Mat load_image(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) {
    throw IoError("cannot decode image " + path.string());
  }
  return img;
}

std::string encode_png(const cv::Mat& image) {
  std::vector<uchar> buf;
  // Fast compression keeps bulk synthesis cheap; output stays deterministic.
  const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 1};
  if (!cv::imencode(".png", image, buf, params)) {
    throw IoError("PNG encoding failed");
  }
  return {buf.begin(), buf.end()};
}

cv::Mat decode_png(std::string_view bytes) {
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<char*>(bytes.data()));
  cv::Mat img = cv::imdecode(raw, cv::IMREAD_COLOR);
  if (img.empty()) {
    throw ProtocolError("image payload does not decode");
  }
  return img;
}

void save_png(const cv::Mat& image, const std::filesystem::path& path) {
  atomic_write_file(path, encode_png(image));
}

std::string image_to_base64(const cv::Mat& image) {
  return base64_encode(encode_png(image));
}

cv::Mat image_from_base64(std::string_view b64) {
  return decode_png(base64_decode(b64));
}

}  // namespace interleaf
