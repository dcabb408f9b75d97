#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace resid {

class TokenDistribution;

enum class Method {
  top_p,
  top_k,
  temperature,
  eta,
  typical,
  factual,
  real,
  real_cd,
  real_top_k,
  real_f,
  cd,
};

std::string_view to_string(Method m);
// Throws UsageError on an unknown name.
Method parse_method(std::string_view name);

struct DecisionTrace {
  double d_re = 0.0;
  double raw_threshold = 0.0;
  Method method = Method::top_p;
};

}  // namespace resid
