#include "uqac/runtime/table_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"
#include "uqac/simd/kernels.hpp"

namespace uqac::runtime {

bool LanguageModel::is_eos(TokenId t) const {
    const auto& eos = info().eos_tokens;
    return std::find(eos.begin(), eos.end(), t) != eos.end();
}

TableModel::TableModel(TableModelSpec spec) : spec_(std::move(spec)), tokenizer_(spec_.pieces) {
    const std::size_t v = spec_.pieces.size();
    if (v == 0) throw ConfigError("table model needs a vocabulary");
    if (spec_.order == 0) throw ConfigError("table model order must be >= 1");
    if (spec_.n_layers == 0 || spec_.n_heads == 0) throw ConfigError("table model needs at least one head");
    auto check_row = [&](const std::vector<double>& row) {
        if (row.size() != v) throw ConfigError("table row size does not match vocabulary");
        double s = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) throw ConfigError("negative table probability");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("table row does not sum to 1");
    };
    for (const auto& [ctx, row] : spec_.rows) check_row(row);
    if (!spec_.fallback.empty()) check_row(spec_.fallback);
    uniform_.assign(v, 1.0 / static_cast<double>(v));

    info_.name = spec_.name;
    info_.vocab_size = v;
    info_.n_layers = spec_.n_layers;
    info_.n_heads = spec_.n_heads;
    info_.hidden_dim = v + 4;
    info_.max_context = spec_.max_context;
    info_.eos_tokens = spec_.eos;
}

std::unique_ptr<TableModel> TableModel::from_json(const nlohmann::json& doc) {
    TableModelSpec spec;
    spec.name = doc.value("name", std::string("table"));
    spec.pieces = doc.at("pieces").get<std::vector<std::string>>();
    spec.order = doc.value("order", std::size_t{1});
    for (const auto& r : doc.value("rows", nlohmann::json::array())) {
        spec.rows[r.at("context").get<std::vector<TokenId>>()] = r.at("probs").get<std::vector<double>>();
    }
    spec.fallback = doc.value("fallback", std::vector<double>{});
    spec.eos = doc.value("eos", std::vector<TokenId>{});
    spec.n_layers = doc.value("n_layers", std::size_t{2});
    spec.n_heads = doc.value("n_heads", std::size_t{2});
    spec.max_context = doc.value("max_context", std::size_t{4096});
    return std::make_unique<TableModel>(std::move(spec));
}

const std::vector<double>& TableModel::distribution(std::span<const TokenId> prefix) const {
    const std::size_t k = std::min(spec_.order, prefix.size());
    const std::vector<TokenId> ctx(prefix.end() - static_cast<std::ptrdiff_t>(k), prefix.end());
    if (auto it = spec_.rows.find(ctx); it != spec_.rows.end()) return it->second;
    return spec_.fallback.empty() ? uniform_ : spec_.fallback;
}

void TableModel::synthetic_attention(std::span<const TokenId> history, std::size_t layer, std::size_t head,
                                     std::span<float> row) const {
    const std::size_t q = history.size() - 1;
    const double decay = 0.15 + 0.35 * static_cast<double>(head) + 0.2 * static_cast<double>(layer);
    for (std::size_t j = 0; j <= q; ++j) {
        const double dist = static_cast<double>(q - j);
        const double same = history[j] == history[q] ? 1.5 : 0.0;
        const double tag = 0.4 * static_cast<double>((history[j] * 7 + static_cast<TokenId>(layer * 3 + head)) % 5);
        row[j] = static_cast<float>(-decay * dist + same + tag);
    }
    simd::kernels().softmax(row.data(), q + 1);
}

void TableModel::synthetic_hidden(std::span<const TokenId> history, std::span<float> out) const {
    std::fill(out.begin(), out.end(), 0.0f);
    const std::size_t q = history.size() - 1;
    const auto tok = static_cast<std::size_t>(history[q]);
    const std::size_t v = spec_.pieces.size();
    out[tok] = 1.0f;
    out[v] = static_cast<float>(std::cos(0.37 * static_cast<double>(q)));
    out[v + 1] = static_cast<float>(std::sin(0.37 * static_cast<double>(q)));
    out[v + 2] = static_cast<float>(std::cos(0.11 * static_cast<double>(tok)));
    out[v + 3] = 0.5f;
}

namespace {

class TableSession final : public DecodeSession {
public:
    explicit TableSession(const TableModel& model) : model_(model) {
        hidden_.resize(model.info().hidden_dim);
    }

    const StepOutput& append(TokenId token, bool capture_attention) override {
        const auto& info = model_.info();
        if (token < 0 || static_cast<std::size_t>(token) >= info.vocab_size) throw PositionError("token id out of range");
        if (history_.size() >= info.max_context) throw TruncationError("table model context exhausted");
        history_.push_back(token);
        const auto& dist = model_.distribution(history_);
        probs_.assign(dist.begin(), dist.end());
        model_.synthetic_hidden(history_, hidden_);

        out_ = StepOutput{};
        out_.position = history_.size() - 1;
        out_.probs = probs_;
        out_.hidden = hidden_;
        out_.n_layers = info.n_layers;
        out_.n_heads = info.n_heads;
        if (capture_attention) {
            const std::size_t len = history_.size();
            attention_.assign(info.n_layers * info.n_heads * len, 0.0f);
            for (std::size_t l = 0; l < info.n_layers; ++l) {
                for (std::size_t h = 0; h < info.n_heads; ++h) {
                    model_.synthetic_attention(history_, l, h,
                                               std::span<float>(attention_).subspan((l * info.n_heads + h) * len, len));
                }
            }
            out_.attention = attention_;
        }
        return out_;
    }

    std::size_t length() const override { return history_.size(); }

private:
    const TableModel& model_;
    std::vector<TokenId> history_;
    std::vector<double> probs_;
    std::vector<float> hidden_;
    std::vector<float> attention_;
    StepOutput out_;
};

}  // namespace

std::unique_ptr<DecodeSession> TableModel::open_session() const {
    return std::make_unique<TableSession>(*this);
}

}  // namespace uqac::runtime
