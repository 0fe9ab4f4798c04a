#include "dexflow/cfg.hpp"

#include <stdexcept>

namespace dexflow {

const std::vector<Succ>& Cfg::at(int pp) const
{
    auto it = succ.find(pp);
    if (it == succ.end()) throw std::out_of_range("no program point " + std::to_string(pp));
    return it->second;
}

}  // namespace dexflow
