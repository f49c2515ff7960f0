#include "annsnn/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "annsnn/errors.hpp"

namespace annsnn {

namespace {

constexpr int format_version = 1;

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_header(std::ostream& out, const Topology& topo, const std::string& kind, std::uint64_t seed)
{
    out << "annsnn-model\n";
    out << "format " << format_version << '\n';
    out << "kind " << kind << '\n';
    out << "seed " << seed << '\n';
    out << "input";
    for (std::size_t e : topo.input_shape) {
        out << ' ' << e;
    }
    out << '\n';
    for (const LayerSpec& l : topo.layers) {
        out << "layer " << to_string(l.kind);
        switch (l.kind) {
        case LayerKind::linear:
            out << " in=" << l.in_features << " out=" << l.out_features << " clip=" << l.has_clip;
            break;
        case LayerKind::conv2d:
            out << " in_channels=" << l.in_channels << " out_channels=" << l.out_channels << " kernel=" << l.kernel
                << " stride=" << l.stride << " padding=" << l.padding << " clip=" << l.has_clip;
            break;
        case LayerKind::avgpool2d:
            out << " window=" << l.window;
            break;
        case LayerKind::flatten:
            break;
        }
        out << '\n';
    }
    out << "end\n";
}

void write_block(std::ostream& out, const std::string& name, const Tensor& t)
{
    out << "block " << name;
    for (std::size_t e : t.shape()) {
        out << ' ' << e;
    }
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        out << format_double(t[i]) << ((i % 8 == 7 || i + 1 == t.size()) ? '\n' : ' ');
    }
}

void write_scalar(std::ostream& out, const std::string& name, double v)
{
    write_block(out, name, Tensor({1}, std::vector<double>{v}));
}

class Reader
{
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Next non-empty line split on whitespace; false at end of stream.
    bool next(std::vector<std::string>& tokens)
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            std::istringstream ss(line);
            tokens.clear();
            std::string tok;
            while (ss >> tok) {
                tokens.push_back(tok);
            }
            if (!tokens.empty()) {
                return true;
            }
        }
        return false;
    }

    void expect(std::vector<std::string>& tokens, const char* what)
    {
        if (!next(tokens)) {
            fail(std::string("unexpected end of file, expected ") + what);
        }
    }

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw ParseError("model file line " + std::to_string(line_) + ": " + msg);
    }

    std::size_t parse_size(const std::string& s) const
    {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail("expected an unsigned integer, got '" + s + "'");
        }
        return v;
    }

    double parse_double(const std::string& s) const
    {
        double v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail("expected a number, got '" + s + "'");
        }
        return v;
    }

    int line() const { return line_; }

private:
    std::istream& in_;
    int line_ = 0;
};

struct Header
{
    std::string kind;
    std::uint64_t seed = 0;
    Topology topology;
};

Header read_header(Reader& r)
{
    std::vector<std::string> tok;
    r.expect(tok, "magic");
    if (tok.size() != 1 || tok[0] != "annsnn-model") {
        r.fail("not an annsnn model file");
    }
    Header h;
    bool saw_format = false;
    while (true) {
        r.expect(tok, "header entry");
        const std::string& key = tok[0];
        if (key == "end") {
            break;
        }
        if (key == "format") {
            if (tok.size() != 2 || r.parse_size(tok[1]) != format_version) {
                r.fail("unsupported format version");
            }
            saw_format = true;
        } else if (key == "kind") {
            if (tok.size() != 2 || (tok[1] != "ann" && tok[1] != "snn")) {
                r.fail("kind must be ann or snn");
            }
            h.kind = tok[1];
        } else if (key == "seed") {
            if (tok.size() != 2) {
                r.fail("seed takes one value");
            }
            std::uint64_t seed = 0;
            const auto [ptr, ec] = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), seed);
            if (ec != std::errc() || ptr != tok[1].data() + tok[1].size()) {
                r.fail("bad seed '" + tok[1] + "'");
            }
            h.seed = seed;
        } else if (key == "input") {
            for (std::size_t i = 1; i < tok.size(); ++i) {
                h.topology.input_shape.push_back(r.parse_size(tok[i]));
            }
        } else if (key == "layer") {
            if (tok.size() < 2) {
                r.fail("layer needs a kind");
            }
            std::map<std::string, std::size_t> kv;
            for (std::size_t i = 2; i < tok.size(); ++i) {
                const auto eq = tok[i].find('=');
                if (eq == std::string::npos) {
                    r.fail("layer attribute '" + tok[i] + "' lacks '='");
                }
                kv[tok[i].substr(0, eq)] = r.parse_size(tok[i].substr(eq + 1));
            }
            auto get = [&](const char* name) {
                const auto it = kv.find(name);
                if (it == kv.end()) {
                    r.fail(std::string("layer lacks attribute ") + name);
                }
                return it->second;
            };
            if (tok[1] == "linear") {
                h.topology.layers.push_back(LayerSpec::linear(get("in"), get("out"), get("clip") != 0));
            } else if (tok[1] == "conv2d") {
                h.topology.layers.push_back(LayerSpec::conv(get("in_channels"), get("out_channels"), get("kernel"),
                                                            get("stride"), get("padding"), get("clip") != 0));
            } else if (tok[1] == "avgpool2d") {
                h.topology.layers.push_back(LayerSpec::avgpool(get("window")));
            } else if (tok[1] == "flatten") {
                h.topology.layers.push_back(LayerSpec::flat());
            } else {
                r.fail("unknown layer kind '" + tok[1] + "'");
            }
        } else {
            r.fail("unknown header key '" + key + "'");
        }
    }
    if (!saw_format || h.kind.empty()) {
        r.fail("header lacks format or kind");
    }
    try {
        h.topology.validate();
    } catch (const ConfigError& e) {
        r.fail(e.what());
    }
    return h;
}

std::map<std::string, Tensor> read_blocks(Reader& r)
{
    std::map<std::string, Tensor> blocks;
    std::vector<std::string> tok;
    while (r.next(tok)) {
        if (tok[0] != "block" || tok.size() < 3) {
            r.fail("expected 'block <name> <shape...>'");
        }
        Shape shape;
        for (std::size_t i = 2; i < tok.size(); ++i) {
            shape.push_back(r.parse_size(tok[i]));
        }
        const std::size_t count = shape_size(shape);
        if (count == 0) {
            r.fail("block " + tok[1] + " has an empty shape");
        }
        std::vector<double> values;
        values.reserve(count);
        std::vector<std::string> row;
        while (values.size() < count) {
            r.expect(row, "block values");
            for (const std::string& v : row) {
                values.push_back(r.parse_double(v));
            }
        }
        if (values.size() != count) {
            r.fail("block " + tok[1] + " holds more values than its shape");
        }
        if (!blocks.emplace(tok[1], Tensor(std::move(shape), std::move(values))).second) {
            r.fail("duplicate block " + tok[1]);
        }
    }
    return blocks;
}

Tensor take(std::map<std::string, Tensor>& blocks, const std::string& name)
{
    const auto it = blocks.find(name);
    if (it == blocks.end()) {
        throw ParseError("model file lacks block " + name);
    }
    Tensor t = std::move(it->second);
    blocks.erase(it);
    return t;
}

double take_scalar(std::map<std::string, Tensor>& blocks, const std::string& name)
{
    const Tensor t = take(blocks, name);
    if (t.size() != 1) {
        throw ParseError("block " + name + " must hold a single value");
    }
    return t[0];
}

std::vector<LayerParams> take_params(std::map<std::string, Tensor>& blocks, const Topology& topo, bool with_theta)
{
    std::vector<LayerParams> params(topo.layers.size());
    for (std::size_t l = 0; l < topo.layers.size(); ++l) {
        if (!topo.layers[l].is_parametric()) {
            continue;
        }
        const std::string idx = std::to_string(l);
        params[l].weight = take(blocks, "W." + idx);
        params[l].bias = take(blocks, "b." + idx);
        if (with_theta && topo.layers[l].has_clip) {
            params[l].theta = take_scalar(blocks, "theta." + idx);
        }
    }
    return params;
}

void reject_leftovers(const std::map<std::string, Tensor>& blocks)
{
    if (!blocks.empty()) {
        throw ParseError("model file has unexpected block " + blocks.begin()->first);
    }
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FilesystemError("cannot write " + path);
    }
    return out;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FilesystemError("cannot read " + path);
    }
    return in;
}

}  // namespace

void save_ann(std::ostream& out, const AnnNetwork& net)
{
    net.validate();
    write_header(out, net.topology, "ann", net.seed);
    for (std::size_t l = 0; l < net.params.size(); ++l) {
        if (!net.topology.layers[l].is_parametric()) {
            continue;
        }
        const std::string idx = std::to_string(l);
        write_block(out, "W." + idx, net.params[l].weight);
        write_block(out, "b." + idx, net.params[l].bias);
        if (net.topology.layers[l].has_clip) {
            write_scalar(out, "theta." + idx, net.params[l].theta);
        }
    }
}

AnnNetwork load_ann(std::istream& in)
{
    Reader r(in);
    Header h = read_header(r);
    if (h.kind != "ann") {
        throw ParseError("expected an ann model, found " + h.kind);
    }
    auto blocks = read_blocks(r);
    AnnNetwork net;
    net.topology = std::move(h.topology);
    net.seed = h.seed;
    net.params = take_params(blocks, net.topology, true);
    reject_leftovers(blocks);
    try {
        net.validate();
    } catch (const ConfigError& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    return net;
}

void save_snn(std::ostream& out, const SnnNetwork& net)
{
    net.validate();
    write_header(out, net.topology, "snn", 0);
    for (std::size_t l = 0; l < net.params.size(); ++l) {
        if (!net.topology.layers[l].is_parametric()) {
            continue;
        }
        const std::string idx = std::to_string(l);
        write_block(out, "W." + idx, net.params[l].weight);
        write_block(out, "b." + idx, net.params[l].bias);
        if (net.is_spiking(l)) {
            write_scalar(out, "Vth." + idx, net.threshold[l]);
            write_block(out, "vinit." + idx, net.v_init[l]);
        }
    }
}

SnnNetwork load_snn(std::istream& in)
{
    Reader r(in);
    Header h = read_header(r);
    if (h.kind != "snn") {
        throw ParseError("expected an snn model, found " + h.kind);
    }
    auto blocks = read_blocks(r);
    SnnNetwork net;
    net.topology = std::move(h.topology);
    net.params = take_params(blocks, net.topology, false);
    net.threshold.assign(net.topology.layers.size(), 0.0);
    net.v_init.resize(net.topology.layers.size());
    for (std::size_t l = 0; l < net.topology.layers.size(); ++l) {
        if (net.is_spiking(l)) {
            const std::string idx = std::to_string(l);
            net.threshold[l] = take_scalar(blocks, "Vth." + idx);
            net.v_init[l] = take(blocks, "vinit." + idx);
        }
    }
    reject_leftovers(blocks);
    try {
        net.validate();
    } catch (const ConfigError& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    return net;
}

void save_ann_file(const std::string& path, const AnnNetwork& net)
{
    auto out = open_out(path);
    save_ann(out, net);
}

AnnNetwork load_ann_file(const std::string& path)
{
    auto in = open_in(path);
    return load_ann(in);
}

void save_snn_file(const std::string& path, const SnnNetwork& net)
{
    auto out = open_out(path);
    save_snn(out, net);
}

SnnNetwork load_snn_file(const std::string& path)
{
    auto in = open_in(path);
    return load_snn(in);
}

std::string model_kind_of_file(const std::string& path)
{
    auto in = open_in(path);
    Reader r(in);
    return read_header(r).kind;
}

}  // namespace annsnn
