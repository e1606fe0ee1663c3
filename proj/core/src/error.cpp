#include "ftg/error.hpp"

#include <utility>

namespace ftg {

ParseError::ParseError(std::string file, std::size_t line, const std::string& what)
    : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}

TrainingDiverged::TrainingDiverged(std::string stage, long step)
    : Error(stage + " diverged: non-finite loss at step " + std::to_string(step)), step_(step) {}

}  // namespace ftg
