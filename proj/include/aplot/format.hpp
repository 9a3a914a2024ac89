#ifndef APLOT_FORMAT_HPP_
#define APLOT_FORMAT_HPP_

#include <cstdio>
#include <string>

namespace aplot {

/// CSV float formatting: 9 significant digits, '.' decimal point.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace aplot

#endif  // APLOT_FORMAT_HPP_
