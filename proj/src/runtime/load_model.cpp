#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"
#include "uqac/runtime/model.hpp"
#include "uqac/runtime/table_model.hpp"
#include "uqac/runtime/transformer.hpp"

namespace uqac::runtime {

namespace fs = std::filesystem;

std::unique_ptr<LanguageModel> load_model(const std::string& path) {
    const fs::path p(path);
    fs::path table_file;
    if (fs::is_regular_file(p) && p.extension() == ".json") {
        table_file = p;
    } else if (fs::is_directory(p) && fs::exists(p / "table.json")) {
        table_file = p / "table.json";
    }
    if (!table_file.empty()) {
        std::ifstream in(table_file);
        try {
            return TableModel::from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw LoadError("malformed table model " + table_file.string() + ": " + e.what());
        }
    }
    if (!fs::is_directory(p)) throw LoadError("model path does not exist: " + path);
    return TransformerModel::load(p);
}

}  // namespace uqac::runtime
