#pragma once

#include <string>
#include <vector>

#include "incpref/config.hpp"

namespace incpref {

// Fixed-column CSV built in memory; doubles are written with %.17g.
class Csv {
public:
    explicit Csv(std::vector<std::string> columns);
    Csv& add(double v);
    Csv& add(std::size_t v);
    Csv& add(const std::string& v);
    Csv& empty();
    // checks that the row is complete
    void end_row();
    const std::string& text() const { return text_; }
    std::size_t rows() const { return rows_; }

private:
    void sep();
    std::size_t ncols_;
    std::size_t col_ = 0;
    std::size_t rows_ = 0;
    std::string text_;
};

std::string format_double(double v);

// Writes via a temporary file in the same directory and a rename.
void write_atomic(const std::string& path, const std::string& content);

struct CommandOutput {
    std::vector<std::pair<std::string, std::string>> files;  // name, content
};

CommandOutput cmd_frontier(const ExperimentConfig& cfg);
CommandOutput cmd_index_set(const ExperimentConfig& cfg);
CommandOutput cmd_solve(const ExperimentConfig& cfg);
CommandOutput cmd_portfolio(const ExperimentConfig& cfg);
CommandOutput cmd_convergence(const ExperimentConfig& cfg);

CommandOutput run_command(const std::string& verb, const ExperimentConfig& cfg);
// Writes every file of the output under cfg.out and returns their paths.
std::vector<std::string> write_output(const ExperimentConfig& cfg, const CommandOutput& out);

}  // namespace incpref
