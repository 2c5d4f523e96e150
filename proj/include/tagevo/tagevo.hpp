#pragma once

#include "tagevo/community.hpp"
#include "tagevo/corpus.hpp"
#include "tagevo/corpus_cache.hpp"
#include "tagevo/distribution.hpp"
#include "tagevo/error.hpp"
#include "tagevo/graph.hpp"
#include "tagevo/log_reader.hpp"
#include "tagevo/novelty.hpp"
#include "tagevo/power_law.hpp"
#include "tagevo/random.hpp"
#include "tagevo/semshift.hpp"
#include "tagevo/tag_normalize.hpp"
#include "tagevo/yule_simon.hpp"

namespace tagevo {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tagevo
