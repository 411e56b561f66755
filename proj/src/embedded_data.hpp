#pragma once

#include <map>
#include <string>

namespace ontree::embedded {

/// Files under data/prompts and data/fewshot, keyed by path relative to data/.
const std::map<std::string, std::string>& files();

}  // namespace ontree::embedded
