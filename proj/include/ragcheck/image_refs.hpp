#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ragcheck {

struct ImageRefScan {
  std::vector<std::size_t> refs;      // 1-based, first-appearance order, deduplicated
  std::vector<std::string> warnings;  // one per malformed token
};

/// Scans for `<imageN>` tokens. Tokens such as `<image>`, `<image0>` or
/// `<imagex>` are skipped with a warning.
inline ImageRefScan extract_image_refs(std::string_view text) {
  static constexpr std::string_view kOpen = "<image";
  ImageRefScan scan;
  for (std::size_t pos = text.find(kOpen); pos != std::string_view::npos;
       pos = text.find(kOpen, pos + 1)) {
    std::size_t digits_begin = pos + kOpen.size();
    std::size_t p = digits_begin;
    while (p < text.size() && text[p] >= '0' && text[p] <= '9') ++p;
    bool closed = p < text.size() && text[p] == '>';
    std::size_t n = 0;
    bool parsed = false;
    if (closed && p > digits_begin) {
      auto [ptr, ec] = std::from_chars(text.data() + digits_begin, text.data() + p, n);
      parsed = ec == std::errc{} && n > 0;
    }
    if (!parsed) {
      auto end = text.find('>', pos);
      auto token = text.substr(pos, end == std::string_view::npos ? 7 : end - pos + 1);
      scan.warnings.push_back("malformed image reference '" + std::string(token) + "' ignored");
      continue;
    }
    if (std::find(scan.refs.begin(), scan.refs.end(), n) == scan.refs.end()) scan.refs.push_back(n);
  }
  return scan;
}

}  // namespace ragcheck
