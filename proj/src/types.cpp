#include "semloc/types.hpp"

#include <string>

#include "semloc/errors.hpp"

namespace semloc {

std::string_view to_string(SemanticClass cls) {
  switch (cls) {
    case SemanticClass::pole:
      return "pole";
    case SemanticClass::trunk:
      return "trunk";
    case SemanticClass::background:
      return "background";
  }
  return "background";
}

SemanticClass class_from_string(std::string_view text) {
  if (text == "pole") return SemanticClass::pole;
  if (text == "trunk") return SemanticClass::trunk;
  if (text == "background") return SemanticClass::background;
  throw ParseError("unknown semantic class '" + std::string(text) + "'");
}

void Trajectory::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) {
      throw InvalidArgument("trajectory timestamps must strictly increase (sample " +
                            std::to_string(i) + ")");
    }
  }
}

}  // namespace semloc
