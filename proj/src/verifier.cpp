#include "valgauge/verifier.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <iterator>

#include "valgauge/format.hpp"
#include "valgauge/random.hpp"
#include "valgauge/text.hpp"

namespace valgauge::verifier {

namespace {

constexpr auto kRows = static_cast<Eigen::Index>(kValueCount);

Eigen::Map<Eigen::VectorXd> flat(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<Eigen::VectorXd> flat(Eigen::VectorXd& v) { return {v.data(), v.size()}; }

void fill_uniform(Eigen::MatrixXd& m, Rng& rng, double bound)
{
    // Row-major fill order keeps the stream independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = rng.uniform(-bound, bound);
}

void fill_uniform(Eigen::VectorXd& v, Rng& rng, double bound)
{
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = rng.uniform(-bound, bound);
}

Eigen::VectorXd profile_scale(const ValueProfile& profile)
{
    Eigen::VectorXd s(kRows);
    for (Eigen::Index k = 0; k < kRows; ++k)
        s(k) = (profile.at(static_cast<std::size_t>(k)) + 1.0) / 2.0;
    return s;
}

struct AttentionCache {
    Eigen::VectorXd scale;   // (v+1)/2 per value
    Eigen::MatrixXd rows;    // scaled value table, 10 x d
    Eigen::MatrixXd keys;    // 10 x d
    Eigen::MatrixXd values;  // 10 x d
    Eigen::VectorXd query;
    Eigen::VectorXd weights;
    Eigen::VectorXd refined;
};

AttentionCache attend(const VerifierParams& p, const Eigen::VectorXd& context, const ValueProfile& profile)
{
    if (context.size() != p.width)
        fail(Errc::shape_mismatch, "context embedding width " + std::to_string(context.size()) +
                                       " differs from verifier width " + std::to_string(p.width));
    AttentionCache c;
    c.scale = profile_scale(profile);
    c.rows = c.scale.asDiagonal() * p.value_table;
    c.keys = c.rows * p.attn_k.transpose();
    c.values = c.rows * p.attn_v.transpose();
    c.query = p.attn_q * context;
    const Eigen::VectorXd logits = c.keys * c.query / std::sqrt(static_cast<double>(p.width));
    const double top = logits.maxCoeff();
    c.weights = (logits.array() - top).exp();
    c.weights /= c.weights.sum();
    c.refined = c.values.transpose() * c.weights;
    return c;
}

struct MlpCache {
    std::vector<Eigen::VectorXd> inputs;  // input to each layer
    double output = 0.0;
};

MlpCache run_mlp(const VerifierParams& p, Eigen::VectorXd x)
{
    MlpCache c;
    for (std::size_t l = 0; l < p.mlp.size(); ++l) {
        c.inputs.push_back(x);
        Eigen::VectorXd z = p.mlp[l].weight * x + p.mlp[l].bias;
        if (l + 1 < p.mlp.size())
            z = z.array().tanh();
        x = std::move(z);
    }
    c.output = x(0);
    return c;
}

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    Eigen::VectorXd x(a.size() + b.size());
    x << a, b;
    return x;
}

// Accumulates d(output)/d(params) * upstream into grad; returns d/d(input).
Eigen::VectorXd backprop_mlp(const VerifierParams& p, const MlpCache& c, double upstream, VerifierParams& grad)
{
    Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, upstream);
    for (std::size_t l = p.mlp.size(); l-- > 0;) {
        grad.mlp[l].weight += delta * c.inputs[l].transpose();
        grad.mlp[l].bias += delta;
        Eigen::VectorXd d_in = p.mlp[l].weight.transpose() * delta;
        if (l > 0) {
            // inputs[l] = tanh(z_{l-1})
            d_in.array() *= 1.0 - c.inputs[l].array().square();
        }
        delta = std::move(d_in);
    }
    return delta;
}

void backprop_attention(const VerifierParams& p, const Eigen::VectorXd& context, const AttentionCache& c,
                        const Eigen::VectorXd& d_refined, VerifierParams& grad)
{
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(p.width));
    const Eigen::VectorXd d_weights = c.values * d_refined;
    const Eigen::MatrixXd d_values = c.weights * d_refined.transpose();
    const Eigen::VectorXd d_logits = c.weights.array() * (d_weights.array() - c.weights.dot(d_weights));
    const Eigen::MatrixXd d_keys = d_logits * c.query.transpose() * inv_sqrt_d;
    const Eigen::VectorXd d_query = c.keys.transpose() * d_logits * inv_sqrt_d;
    grad.attn_q += d_query * context.transpose();
    grad.attn_k += d_keys.transpose() * c.rows;
    grad.attn_v += d_values.transpose() * c.rows;
    const Eigen::MatrixXd d_rows = d_keys * p.attn_k + d_values * p.attn_v;
    grad.value_table += c.scale.asDiagonal() * d_rows;
}

void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what)
{
    if (m.rows() != rows || m.cols() != cols)
        fail(Errc::shape_mismatch, std::string(what) + " has shape " + std::to_string(m.rows()) + "x" +
                                       std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                                       std::to_string(cols));
    if (!m.allFinite())
        fail(Errc::non_finite, std::string(what) + " contains non-finite values");
}

}  // namespace

void VerifierParams::validate() const
{
    if (width < 2)
        fail(Errc::shape_mismatch, "verifier width must be at least 2");
    require_shape(value_table, kRows, width, "value_table");
    require_shape(attn_q, width, width, "attn_q");
    require_shape(attn_k, width, width, "attn_k");
    require_shape(attn_v, width, width, "attn_v");
    if (mlp.empty())
        fail(Errc::shape_mismatch, "verifier MLP has no layers");
    Eigen::Index in = 2 * static_cast<Eigen::Index>(width);
    for (std::size_t l = 0; l < mlp.size(); ++l) {
        const auto name = "mlp layer " + std::to_string(l);
        require_shape(mlp[l].weight, mlp[l].weight.rows(), in, name.c_str());
        if (mlp[l].bias.size() != mlp[l].weight.rows() || !mlp[l].bias.allFinite())
            fail(Errc::shape_mismatch, name + " bias does not match its weight rows");
        in = mlp[l].weight.rows();
    }
    if (in != 1)
        fail(Errc::shape_mismatch, "verifier MLP must end in a single output");
}

std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> parameter_groups(VerifierParams& p)
{
    std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> groups;
    groups.emplace_back("value_table", flat(p.value_table));
    groups.emplace_back("attn_q", flat(p.attn_q));
    groups.emplace_back("attn_k", flat(p.attn_k));
    groups.emplace_back("attn_v", flat(p.attn_v));
    for (std::size_t l = 0; l < p.mlp.size(); ++l) {
        groups.emplace_back("mlp" + std::to_string(l) + ".weight", flat(p.mlp[l].weight));
        groups.emplace_back("mlp" + std::to_string(l) + ".bias", flat(p.mlp[l].bias));
    }
    return groups;
}

VerifierParams zero_params(int width, std::uint64_t encoder_seed)
{
    if (width < 2)
        fail(Errc::shape_mismatch, "verifier width must be at least 2");
    const Eigen::Index d = width;
    VerifierParams p;
    p.width = width;
    p.encoder_seed = encoder_seed;
    p.value_table = Eigen::MatrixXd::Zero(kRows, d);
    p.attn_q = Eigen::MatrixXd::Zero(d, d);
    p.attn_k = Eigen::MatrixXd::Zero(d, d);
    p.attn_v = Eigen::MatrixXd::Zero(d, d);
    const Eigen::Index widths[] = {2 * d, 2 * d, d, 1};
    for (std::size_t l = 0; l + 1 < std::size(widths); ++l)
        p.mlp.push_back({Eigen::MatrixXd::Zero(widths[l + 1], widths[l]), Eigen::VectorXd::Zero(widths[l + 1])});
    return p;
}

VerifierParams init_params(int width, std::uint64_t seed, std::uint64_t encoder_seed)
{
    VerifierParams p = zero_params(width, encoder_seed);
    Rng rng(derive_seed(seed, "verifier-init"));
    const double attn_bound = 1.0 / std::sqrt(static_cast<double>(width));
    fill_uniform(p.value_table, rng, 1.0);
    fill_uniform(p.attn_q, rng, attn_bound);
    fill_uniform(p.attn_k, rng, attn_bound);
    fill_uniform(p.attn_v, rng, attn_bound);
    for (auto& layer : p.mlp) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        fill_uniform(layer.weight, rng, bound);
        fill_uniform(layer.bias, rng, bound);
    }
    return p;
}

namespace {

void append_block(std::string& out, const std::string& name, const Eigen::MatrixXd& m)
{
    out += "matrix " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0)
                out += ' ';
            out += format_double(m(r, c));
        }
        out += '\n';
    }
}

class LineReader {
  public:
    explicit LineReader(std::string_view text) : m_text(text) {}

    std::string_view next()
    {
        while (!m_text.empty()) {
            const auto nl = m_text.find('\n');
            const auto line = trim(m_text.substr(0, nl));
            m_text = nl == std::string_view::npos ? std::string_view{} : m_text.substr(nl + 1);
            ++m_line;
            if (!line.empty())
                return line;
        }
        throw Error(Errc::parse_error, "unexpected end of verifier params").at_line(m_line + 1);
    }

    [[nodiscard]] std::size_t line() const noexcept { return m_line; }

  private:
    std::string_view m_text;
    std::size_t m_line = 0;
};

std::vector<std::string_view> split_spaces(std::string_view s)
{
    std::vector<std::string_view> out;
    while (!s.empty()) {
        const auto sp = s.find(' ');
        if (sp != 0)
            out.push_back(s.substr(0, sp));
        if (sp == std::string_view::npos)
            break;
        s = s.substr(sp + 1);
    }
    return out;
}

double number(std::string_view s, const LineReader& reader)
{
    const auto v = parse_double(s);
    if (!v)
        throw Error(Errc::parse_error, "bad number '" + std::string(s) + "'").at_line(reader.line());
    return *v;
}

std::uint64_t unsigned_number(std::string_view s, const LineReader& reader)
{
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(Errc::parse_error, "bad integer '" + std::string(s) + "'").at_line(reader.line());
    return v;
}

Eigen::MatrixXd read_block(LineReader& reader, const std::string& name)
{
    const auto head = split_spaces(reader.next());
    if (head.size() != 4 || head[0] != "matrix" || head[1] != name)
        throw Error(Errc::parse_error, "expected 'matrix " + name + " ROWS COLS'").at_line(reader.line());
    const auto rows = static_cast<Eigen::Index>(unsigned_number(head[2], reader));
    const auto cols = static_cast<Eigen::Index>(unsigned_number(head[3], reader));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto fields = split_spaces(reader.next());
        if (static_cast<Eigen::Index>(fields.size()) != cols)
            throw Error(Errc::parse_error, "row of " + name + " has the wrong length").at_line(reader.line());
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = number(fields[static_cast<std::size_t>(c)], reader);
    }
    return m;
}

}  // namespace

std::string format_params(const VerifierParams& p)
{
    std::string out = "valgauge-verifier v1\n";
    out += "width " + std::to_string(p.width) + "\n";
    out += "encoder_seed " + std::to_string(p.encoder_seed) + "\n";
    out += "layers " + std::to_string(p.mlp.size()) + "\n";
    append_block(out, "value_table", p.value_table);
    append_block(out, "attn_q", p.attn_q);
    append_block(out, "attn_k", p.attn_k);
    append_block(out, "attn_v", p.attn_v);
    for (std::size_t l = 0; l < p.mlp.size(); ++l) {
        append_block(out, "mlp" + std::to_string(l) + ".weight", p.mlp[l].weight);
        append_block(out, "mlp" + std::to_string(l) + ".bias", p.mlp[l].bias.transpose());
    }
    return out;
}

VerifierParams parse_params(std::string_view text)
{
    LineReader reader(text);
    if (reader.next() != "valgauge-verifier v1")
        throw Error(Errc::parse_error, "missing 'valgauge-verifier v1' header").at_line(reader.line());
    auto scalar = [&](std::string_view key) {
        const auto f = split_spaces(reader.next());
        if (f.size() != 2 || f[0] != key)
            throw Error(Errc::parse_error, "expected '" + std::string(key) + " VALUE'").at_line(reader.line());
        return unsigned_number(f[1], reader);
    };
    VerifierParams p;
    p.width = static_cast<int>(scalar("width"));
    p.encoder_seed = scalar("encoder_seed");
    const auto layers = scalar("layers");
    p.value_table = read_block(reader, "value_table");
    p.attn_q = read_block(reader, "attn_q");
    p.attn_k = read_block(reader, "attn_k");
    p.attn_v = read_block(reader, "attn_v");
    for (std::uint64_t l = 0; l < layers; ++l) {
        DenseLayer layer;
        layer.weight = read_block(reader, "mlp" + std::to_string(l) + ".weight");
        const Eigen::MatrixXd bias = read_block(reader, "mlp" + std::to_string(l) + ".bias");
        if (bias.rows() != 1)
            throw Error(Errc::parse_error, "bias block must be a single row").at_line(reader.line());
        layer.bias = bias.row(0).transpose();
        p.mlp.push_back(std::move(layer));
    }
    p.validate();
    return p;
}

Eigen::VectorXd encode_text(std::string_view text, int width, std::uint64_t seed)
{
    if (width < 2)
        fail(Errc::invalid_argument, "encoder width must be at least 2");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(width);
    for (const auto& token : text::tokenize(text)) {
        Rng rng(derive_seed(seed, token));
        Eigen::VectorXd v(width);
        for (int i = 0; i < width; ++i)
            v(i) = rng.normal();
        const double norm = v.norm();
        if (norm > 0.0)
            sum += v / norm;
    }
    const double norm = sum.norm();
    if (norm > 0.0)
        sum /= norm;
    return sum;
}

Attention cross_attention(const VerifierParams& p, const Eigen::VectorXd& context, const ValueProfile& profile)
{
    const auto c = attend(p, context, profile);
    std::array<double, kValueCount> w{};
    for (std::size_t k = 0; k < kValueCount; ++k)
        w[k] = c.weights(static_cast<Eigen::Index>(k));
    return Attention{c.refined, c.weights, validate_activation(w)};
}

VerifierScore score_embedded(const VerifierParams& p, const Eigen::VectorXd& action, const Eigen::VectorXd& context,
                             const ValueProfile& profile)
{
    if (action.size() != p.width)
        fail(Errc::shape_mismatch, "action embedding width differs from verifier width");
    auto attention = cross_attention(p, context, profile);
    const auto mlp = run_mlp(p, concat(attention.refined, action));
    return VerifierScore{mlp.output, attention.activation};
}

VerifierScore score(const VerifierParams& p, std::string_view action_text, std::string_view context_text,
                    const ValueProfile& profile)
{
    return score_embedded(p, encode_text(action_text, p.width, p.encoder_seed),
                          encode_text(context_text, p.width, p.encoder_seed), profile);
}

EncodedPair encode_pair(const VerifierParams& p, const PreferencePair& pair)
{
    return EncodedPair{encode_text(pair.context_text, p.width, p.encoder_seed),
                       encode_text(pair.chosen, p.width, p.encoder_seed),
                       encode_text(pair.rejected, p.width, p.encoder_seed), pair.value_profile};
}

double pairwise_loss(double margin)
{
    // softplus(-margin)
    return std::log1p(std::exp(-std::abs(margin))) + std::max(-margin, 0.0);
}

double ranking_loss(const VerifierParams& p, const EncodedPair& pair)
{
    const auto c = attend(p, pair.context, pair.profile);
    const double s_w = run_mlp(p, concat(c.refined, pair.chosen)).output;
    const double s_l = run_mlp(p, concat(c.refined, pair.rejected)).output;
    return pairwise_loss(s_w - s_l);
}

double ranking_loss(const VerifierParams& p, const PreferencePair& pair)
{
    if (pair.chosen == pair.rejected)
        fail(Errc::degenerate_pair, "chosen and rejected actions are identical");
    return ranking_loss(p, encode_pair(p, pair));
}

LossGradient loss_and_gradient(const VerifierParams& p, std::span<const EncodedPair> batch)
{
    if (batch.empty())
        fail(Errc::empty_input, "loss_and_gradient: empty batch");
    LossGradient out;
    out.grad = zero_params(p.width, p.encoder_seed);
    out.grad.mlp.clear();
    for (const auto& layer : p.mlp)
        out.grad.mlp.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                                Eigen::VectorXd::Zero(layer.bias.size())});
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const auto d = static_cast<Eigen::Index>(p.width);
    for (const auto& pair : batch) {
        if (pair.chosen.size() != d || pair.rejected.size() != d)
            fail(Errc::shape_mismatch, "action embedding width differs from verifier width");
        const auto att = attend(p, pair.context, pair.profile);
        const auto fw = run_mlp(p, concat(att.refined, pair.chosen));
        const auto fl = run_mlp(p, concat(att.refined, pair.rejected));
        const double margin = fw.output - fl.output;
        out.loss += pairwise_loss(margin) * inv_n;
        // d/dmargin of softplus(-margin) = -sigmoid(-margin)
        const double d_margin = -1.0 / (1.0 + std::exp(margin)) * inv_n;
        const Eigen::VectorXd dx_w = backprop_mlp(p, fw, d_margin, out.grad);
        const Eigen::VectorXd dx_l = backprop_mlp(p, fl, -d_margin, out.grad);
        const Eigen::VectorXd d_refined = dx_w.head(d) + dx_l.head(d);
        backprop_attention(p, pair.context, att, d_refined, out.grad);
    }
    return out;
}

TrainResult train(VerifierParams init, std::span<const EncodedPair> dataset, const TrainHyper& hyper)
{
    if (dataset.empty())
        fail(Errc::empty_input, "train: empty dataset");
    if (!(hyper.lr > 0.0) || hyper.epochs < 0)
        fail(Errc::invalid_argument, "train: lr must be positive and epochs non-negative");
    init.validate();
    TrainResult result{std::move(init), {}};
    result.loss_trace.reserve(static_cast<std::size_t>(hyper.epochs) + 1);
    for (int epoch = 0; epoch <= hyper.epochs; ++epoch) {
        auto lg = loss_and_gradient(result.params, dataset);
        if (!std::isfinite(lg.loss))
            fail(Errc::non_finite_loss, "loss diverged at epoch " + std::to_string(epoch));
        result.loss_trace.push_back(lg.loss);
        if (epoch == hyper.epochs)
            break;
        auto params = parameter_groups(result.params);
        auto grads = parameter_groups(lg.grad);
        for (std::size_t g = 0; g < params.size(); ++g)
            params[g].second -= hyper.lr * grads[g].second;
    }
    return result;
}

double pair_accuracy(const VerifierParams& p, std::span<const EncodedPair> pairs)
{
    if (pairs.empty())
        fail(Errc::empty_input, "pair_accuracy: no pairs");
    std::size_t hits = 0;
    for (const auto& pair : pairs) {
        const auto att = attend(p, pair.context, pair.profile);
        const double s_w = run_mlp(p, concat(att.refined, pair.chosen)).output;
        const double s_l = run_mlp(p, concat(att.refined, pair.rejected)).output;
        if (s_w > s_l)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

namespace {

Eigen::VectorXd unit_normal(Rng& rng, int width)
{
    Eigen::VectorXd v(width);
    do {
        for (int i = 0; i < width; ++i)
            v(i) = rng.normal();
    } while (v.norm() == 0.0);
    return v / v.norm();
}

}  // namespace

PlantedPairs planted_separable_pairs(int width, std::size_t train, std::size_t held_out, std::uint64_t seed)
{
    if (width < 2)
        fail(Errc::invalid_argument, "planted pairs need width >= 2");
    Rng rng(derive_seed(seed, "planted-pairs"));
    PlantedPairs out;
    out.direction = unit_normal(rng, width);
    auto draw = [&] {
        std::array<double, kValueCount> v{};
        for (auto& x : v)
            x = rng.uniform(-1.0, 1.0);
        Eigen::VectorXd a, b;
        double gap = 0.0;
        do {
            a = unit_normal(rng, width);
            b = unit_normal(rng, width);
            gap = out.direction.dot(a) - out.direction.dot(b);
        } while (std::abs(gap) < 0.1);
        if (gap < 0.0)
            std::swap(a, b);
        return EncodedPair{unit_normal(rng, width), a, b, validate_profile(v)};
    };
    for (std::size_t i = 0; i < train; ++i)
        out.train.push_back(draw());
    for (std::size_t i = 0; i < held_out; ++i)
        out.held_out.push_back(draw());
    return out;
}

topology::EmbeddingSet export_value_embeddings(const VerifierParams& p)
{
    p.validate();
    std::vector<ValueDimension> labels(canonical_order().begin(), canonical_order().end());
    return topology::EmbeddingSet(std::move(labels), p.value_table);
}

}  // namespace valgauge::verifier
