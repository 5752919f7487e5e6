/* C interface to the CFG classifier toolkit (cfgadv-ffi).
 *
 * Conventions:
 *  - Opaque handles own their resources; release each with the matching
 *    _free function exactly once. Freeing NULL is a no-op.
 *  - Fallible functions return a CFGADV_* status code and write results
 *    through out-pointers, valid only when the call returned CFGADV_OK.
 *  - Strings written through out-pointers are NUL-terminated, allocated by
 *    the library, and must be released with cfgadv_string_free.
 *  - cfgadv_last_error() describes the most recent failure on the calling
 *    thread; the pointer stays valid until the next failing call on that
 *    thread and must not be freed.
 *
 * This header is maintained by hand; the crate's test suite checks that
 * the declarations below match the exported symbols.
 */

#ifndef CFGADV_H
#define CFGADV_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. */
enum {
    CFGADV_OK = 0,
    CFGADV_ERR_NULL_ARGUMENT = 1,
    CFGADV_ERR_UTF8 = 2,
    CFGADV_ERR_PARSE = 3,
    CFGADV_ERR_INVALID_GRAPH = 4,
    CFGADV_ERR_IO = 5,
    CFGADV_ERR_BAD_MODEL = 6,
    CFGADV_ERR_SPLICE = 7,
    CFGADV_ERR_PANIC = 8
};

/* Number of entries in a feature vector. */
#define CFGADV_FEATURE_COUNT 23

/* Opaque handles. */
typedef struct CfgadvGraph CfgadvGraph;
typedef struct CfgadvClassifier CfgadvClassifier;

/* Library metadata and diagnostics. */
const char *cfgadv_version(void);
size_t cfgadv_feature_count(void);
const char *cfgadv_last_error(void);

/* Graphs. `text` uses the line-oriented format:
 *   cfg <name> / entry <id> / label <benign|malicious|unlabeled>
 *   followed by `node <id>` lines and `edge <src> <dst>` lines. */
int cfgadv_graph_parse(const char *text, CfgadvGraph **out);
void cfgadv_graph_free(CfgadvGraph *graph);
size_t cfgadv_graph_node_count(const CfgadvGraph *graph);
size_t cfgadv_graph_edge_count(const CfgadvGraph *graph);
int cfgadv_graph_serialize(const CfgadvGraph *graph, char **out);
void cfgadv_string_free(char *s);

/* Raw (unnormalized) features; `out` must hold CFGADV_FEATURE_COUNT
 * doubles. */
int cfgadv_graph_features(const CfgadvGraph *graph, double *out);

/* Graph splicing: embeds `target` into `original` behind a fresh glue
 * entry/exit pair, preserving the original entry-to-exit path. */
int cfgadv_graph_splice(const CfgadvGraph *original, const CfgadvGraph *target,
                        CfgadvGraph **out);

/* Classifier: model and normalizer JSON files as written by `cfgadv
 * train`. */
int cfgadv_classifier_load(const char *model_path, const char *normalizer_path,
                           CfgadvClassifier **out);
void cfgadv_classifier_free(CfgadvClassifier *classifier);

/* Full pipeline on a graph handle: extract, normalize, classify. */
int cfgadv_classify_graph(const CfgadvClassifier *classifier,
                          const CfgadvGraph *graph, double *p_benign,
                          double *p_malicious);

/* Forward pass on an already-normalized feature vector of
 * CFGADV_FEATURE_COUNT doubles. */
int cfgadv_classify_features(const CfgadvClassifier *classifier,
                             const double *features, double *p_benign,
                             double *p_malicious);

#ifdef __cplusplus
}
#endif

#endif /* CFGADV_H */
