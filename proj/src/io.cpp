#include "opfline/io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace opfline {

namespace {

const Json& field(const Json& j, const char* name, const std::string& path) {
    if (!j.contains(name)) throw ParseError("schema: missing field " + path + "." + name);
    return j.at(name);
}

} // namespace

RadialInstance parse_instance(const Json& doc) {
    RadialInstance inst;
    if (!doc.is_object()) throw ParseError("schema: document is not an object");
    if (field(doc, "version", "$").get<int>() != 1) throw ParseError("schema: unsupported version");
    inst.v0 = field(doc, "v0", "$").get<double>();

    const Json& nodes = field(doc, "nodes", "$");
    const int m = static_cast<int>(nodes.size()) - 1;
    if (m < 1) throw ParseError("schema: need at least two nodes");
    inst.node_count = m;
    inst.parent.assign(m + 1, -1);
    inst.v_min.assign(m + 1, 0.0);
    inst.v_max.assign(m + 1, 0.0);
    inst.edges.assign(m + 1, Edge{});

    std::set<int> seen;
    for (const Json& nd : nodes) {
        const int id = field(nd, "id", "nodes[]").get<int>();
        if (id < 0 || id > m) throw ParseError("schema: node id " + std::to_string(id) + " out of range");
        if (!seen.insert(id).second)
            throw ParseError("schema: duplicate node id " + std::to_string(id));
        inst.parent[id] = field(nd, "parent", "nodes[]").get<int>();
        inst.v_min[id] = field(nd, "v_min", "nodes[]").get<double>();
        inst.v_max[id] = field(nd, "v_max", "nodes[]").get<double>();
    }

    for (const Json& ed : field(doc, "edges", "$")) {
        const int to = field(ed, "to", "edges[]").get<int>();
        const int from = field(ed, "from", "edges[]").get<int>();
        if (to < 1 || to > m) throw ParseError("schema: edge child " + std::to_string(to) + " out of range");
        if (from != inst.parent[to]) throw ParseError("tree: edge endpoints disagree with node parents");
        Edge& e = inst.edges[to];
        e.z = Complex{field(ed, "z_re", "edges[]").get<double>(), field(ed, "z_im", "edges[]").get<double>()};
        if (e.z.real() < 0.0) throw ParseError("sign: negative resistance on edge into node " + std::to_string(to));
        e.power_cap = field(ed, "s_cap", "edges[]").get<double>();
        e.current_cap = field(ed, "l_cap", "edges[]").get<double>();
        if (e.power_cap < 0.0 || e.current_cap < 0.0)
            throw ParseError("sign: negative capacity on edge into node " + std::to_string(to));
    }

    std::set<int> user_ids;
    for (const Json& ud : field(doc, "users", "$")) {
        const int id = field(ud, "id", "users[]").get<int>();
        if (!user_ids.insert(id).second)
            throw ParseError("schema: duplicate user id " + std::to_string(id));
        User u;
        u.node = field(ud, "node", "users[]").get<int>();
        u.demand = Complex{field(ud, "s_re", "users[]").get<double>(),
                           field(ud, "s_im", "users[]").get<double>()};
        u.utility = field(ud, "utility", "users[]").get<double>();
        const std::string kind = field(ud, "kind", "users[]").get<std::string>();
        if (kind == "inelastic")
            u.kind = UserKind::Inelastic;
        else if (kind == "elastic")
            u.kind = UserKind::Elastic;
        else
            throw ParseError("schema: unknown user kind '" + kind + "'");
        inst.users.push_back(u);
    }
    if (static_cast<int>(user_ids.size()) != static_cast<int>(inst.users.size()) ||
        (!user_ids.empty() && (*user_ids.begin() != 0 ||
                               *user_ids.rbegin() != static_cast<int>(inst.users.size()) - 1)))
        throw ParseError("schema: user ids must be 0..n-1");

    const Json& obj = field(doc, "objective", "$");
    inst.objective.breakpoints = field(obj, "breakpoints", "objective").get<std::vector<double>>();
    inst.objective.slopes = field(obj, "slopes", "objective").get<std::vector<double>>();
    inst.objective.m_shift = field(obj, "m_shift", "objective").get<double>();
    if (obj.contains("phi")) inst.objective.phi = obj.at("phi").get<double>();
    if (obj.contains("f1_weights"))
        for (auto it = obj.at("f1_weights").begin(); it != obj.at("f1_weights").end(); ++it)
            inst.objective.f1_weights[std::stoi(it.key())] = it.value().get<double>();

    try {
        inst.finalize();
    } catch (const std::exception& ex) {
        throw ParseError(std::string("tree: ") + ex.what());
    }
    return inst;
}

Json emit_instance(const RadialInstance& inst) {
    Json doc;
    doc["version"] = 1;
    doc["v0"] = inst.v0;
    Json nodes = Json::array();
    for (int j = 0; j <= inst.node_count; ++j)
        nodes.push_back({{"id", j},
                         {"parent", inst.parent[j]},
                         {"v_min", inst.v_min[j]},
                         {"v_max", inst.v_max[j]}});
    doc["nodes"] = std::move(nodes);
    Json edges = Json::array();
    for (int j = 1; j <= inst.node_count; ++j)
        edges.push_back({{"from", inst.parent[j]},
                         {"to", j},
                         {"z_re", inst.edges[j].z.real()},
                         {"z_im", inst.edges[j].z.imag()},
                         {"s_cap", inst.edges[j].power_cap},
                         {"l_cap", inst.edges[j].current_cap}});
    doc["edges"] = std::move(edges);
    Json users = Json::array();
    for (size_t k = 0; k < inst.users.size(); ++k) {
        const User& u = inst.users[k];
        users.push_back({{"id", static_cast<int>(k)},
                         {"node", u.node},
                         {"s_re", u.demand.real()},
                         {"s_im", u.demand.imag()},
                         {"utility", u.utility},
                         {"kind", u.kind == UserKind::Inelastic ? "inelastic" : "elastic"}});
    }
    doc["users"] = std::move(users);
    Json obj;
    obj["breakpoints"] = inst.objective.breakpoints;
    obj["slopes"] = inst.objective.slopes;
    obj["m_shift"] = inst.objective.m_shift;
    obj["phi"] = inst.objective.phi;
    Json weights = Json::object();
    for (size_t k = 0; k < inst.users.size(); ++k)
        if (inst.users[k].kind == UserKind::Elastic && inst.users[k].f1_coeff != 0.0 &&
            inst.users[k].demand.real() != 0.0)
            weights[std::to_string(k)] = inst.users[k].f1_coeff / inst.users[k].demand.real();
    obj["f1_weights"] = std::move(weights);
    doc["objective"] = std::move(obj);
    return doc;
}

RadialInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    Json doc = Json::parse(in);
    return parse_instance(doc);
}

void save_json(const Json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

GufpInstance parse_gufp(const Json& doc) {
    GufpInstance g;
    g.utility = field(doc, "utility", "$").get<std::vector<double>>();
    for (const Json& dd : field(doc, "dims", "$")) {
        GufpDimension d;
        d.terms = field(dd, "terms", "dims[]").get<int>();
        d.reversed = dd.value("reversed", false);
        d.base = field(dd, "base", "dims[]").get<std::vector<std::vector<double>>>();
        d.coeff = field(dd, "coeff", "dims[]").get<std::vector<std::vector<double>>>();
        d.start = field(dd, "start", "dims[]").get<std::vector<int>>();
        d.sat = field(dd, "sat", "dims[]").get<std::vector<int>>();
        d.capacity = field(dd, "capacity", "dims[]").get<std::vector<double>>();
        if (static_cast<int>(d.base.size()) != d.terms || static_cast<int>(d.coeff.size()) != d.terms)
            throw ParseError("schema: dims[].base/coeff must have one row per term");
        g.dims.push_back(std::move(d));
    }
    return g;
}

Json emit_gufp(const GufpInstance& g) {
    Json doc;
    doc["utility"] = g.utility;
    Json dims = Json::array();
    for (const GufpDimension& d : g.dims)
        dims.push_back({{"terms", d.terms},
                        {"reversed", d.reversed},
                        {"base", d.base},
                        {"coeff", d.coeff},
                        {"start", d.start},
                        {"sat", d.sat},
                        {"capacity", d.capacity}});
    doc["dims"] = std::move(dims);
    return doc;
}

GufpInstance load_gufp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    Json doc = Json::parse(in);
    return parse_gufp(doc);
}

Json emit_state(const PowerFlowState& st) {
    Json j;
    j["s0_re"] = st.s0.real();
    j["s0_im"] = st.s0.imag();
    j["x"] = st.x;
    j["v"] = st.v;
    j["l"] = st.l;
    Json sre = Json::array(), sim = Json::array();
    for (const Complex& s : st.S) {
        sre.push_back(s.real());
        sim.push_back(s.imag());
    }
    j["S_re"] = std::move(sre);
    j["S_im"] = std::move(sim);
    return j;
}

Json emit_report(const FeasibilityReport& rep) {
    return Json{{"power_balance", rep.power_balance},
                {"root_balance", rep.root_balance},
                {"voltage_drop", rep.voltage_drop},
                {"voltage_bounds", rep.voltage_bounds},
                {"forward_capacity", rep.forward_capacity},
                {"reverse_capacity", rep.reverse_capacity},
                {"current_cap", rep.current_cap},
                {"cone", rep.cone},
                {"exactness", rep.exactness},
                {"feasible", rep.feasible}};
}

RadialInstance generate_instance(std::uint64_t seed, int m, int n_inelastic, int n_elastic,
                                 const std::string& profile) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    const double deg = std::numbers::pi / 180.0;

    double z_lo = 0.004, z_hi = 0.02;
    double cap_scale_lo = 1.2, cap_scale_hi = 2.0;
    double v_band = 0.05;
    if (profile == "lossy") {
        z_lo = 0.02;
        z_hi = 0.06;
    } else if (profile == "tight") {
        cap_scale_lo = 0.35;
        cap_scale_hi = 0.8;
        v_band = 0.03;
    } else if (profile != "default") {
        throw ParseError("unknown generator profile '" + profile + "'");
    }

    RadialInstance inst;
    inst.node_count = m;
    inst.v0 = 1.0;
    inst.parent.assign(m + 1, -1);
    inst.edges.assign(m + 1, Edge{});
    inst.v_min.assign(m + 1, (1.0 - v_band) * (1.0 - v_band));
    inst.v_max.assign(m + 1, (1.0 + v_band) * (1.0 + v_band));
    for (int j = 1; j <= m; ++j) inst.parent[j] = j - 1;

    double total_demand = 0.0;
    const int n = n_inelastic + n_elastic;
    for (int k = 0; k < n; ++k) {
        User u;
        u.node = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(m));
        // Phase window [-18, 18] degrees: pairwise spread <= 36 degrees
        // (power factor >= 0.8), and a non-trivial rotation angle.
        const double mag = uni(0.01, 0.06);
        const double ang = uni(-18.0 * deg, 18.0 * deg);
        u.demand = std::polar(mag, ang);
        u.utility = uni(0.5, 2.0);
        u.kind = k < n_inelastic ? UserKind::Inelastic : UserKind::Elastic;
        total_demand += mag;
        inst.users.push_back(u);
    }
    total_demand = std::max(total_demand, 0.05);

    for (int j = 1; j <= m; ++j) {
        const double mag = uni(z_lo, z_hi);
        // First quadrant, and within 90 degrees of every demand angle
        // (demands sit in [-18, 18] degrees, so cap the impedance at 70).
        const double ang = uni(15.0 * deg, 70.0 * deg);
        inst.edges[j].z = std::polar(mag, ang);
        const double cap = uni(cap_scale_lo, cap_scale_hi) * total_demand;
        inst.edges[j].power_cap = cap;
        const double l_cap = cap * cap / inst.v_min[j];
        inst.edges[j].current_cap = 1.5 * l_cap;
    }

    inst.objective.breakpoints = {-0.25 * total_demand};
    inst.objective.slopes = {1.2, 0.8};
    inst.objective.m_shift = 1.0;
    for (int k = n_inelastic; k < n; ++k) inst.objective.f1_weights[k] = uni(0.5, 2.0);

    inst.finalize();
    return inst;
}

GufpInstance generate_gufp(std::uint64_t seed, int users, int edges) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    GufpInstance g;
    for (int k = 0; k < users; ++k) g.utility.push_back(uni(0.2, 2.0));

    const int terms_per_dim[3] = {2, 1, 1};
    for (int r = 0; r < 3; ++r) {
        GufpDimension d;
        d.terms = terms_per_dim[r];
        d.reversed = r > 0;
        d.base.assign(d.terms, std::vector<double>(edges, 0.0));
        for (int t = 0; t < d.terms; ++t) {
            double acc = 0.0;
            const int first_pos = static_cast<int>(rng() % static_cast<std::uint64_t>(edges));
            for (int e = 0; e < edges; ++e) {
                if (e >= first_pos) acc += uni(0.05, 1.0) * (uni(0.0, 1.0) < 0.25 ? 8.0 : 1.0);
                d.base[t][e] = acc;
            }
        }
        d.coeff.assign(d.terms, std::vector<double>(users, 0.0));
        d.start.assign(users, 0);
        d.sat.assign(users, 0);
        for (int k = 0; k < users; ++k) {
            for (int t = 0; t < d.terms; ++t)
                d.coeff[t][k] = uni(0.0, 1.0) < 0.15 ? 0.0 : uni(0.05, 1.0);
            int a = static_cast<int>(rng() % static_cast<std::uint64_t>(edges));
            int b = static_cast<int>(rng() % static_cast<std::uint64_t>(edges));
            d.start[k] = std::min(a, b);
            d.sat[k] = std::max(a, b);
        }
        d.capacity.assign(edges, 0.0);
        g.dims.push_back(std::move(d));
    }
    // Capacities: a random mix of the demands, so some subsets fit.
    for (int r = 0; r < 3; ++r) {
        for (int e = 0; e < g.num_edges(); ++e) {
            double load = 0.0;
            for (int k = 0; k < users; ++k) load += evaluate_demand(g, k, r, e);
            g.dims[r].capacity[e] = uni(0.3, 0.9) * load;
        }
        // restore monotonicity of the capacity in the dimension's order
        for (int e = 1; e < g.num_edges(); ++e)
            g.dims[r].capacity[e] = std::max(g.dims[r].capacity[e], g.dims[r].capacity[e - 1]);
    }
    return g;
}

} // namespace opfline
