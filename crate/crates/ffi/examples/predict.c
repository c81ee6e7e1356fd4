/* Build: cc predict.c -I../include -L<target>/release -lmolsets_ffi -lpthread -ldl -lm */
#include <stdio.h>
#include "molsets.h"

int main(int argc, char **argv) {
    MolsetsModel *model = NULL;
    MolsetsStatus st = argc > 1 ? molsets_model_load(argv[1], &model)
                                : molsets_model_new("graphconv", "molsets", 0, &model);
    if (st != MOLSETS_STATUS_OK) {
        fprintf(stderr, "load failed (%d): %s\n", (int)st, molsets_last_error());
        return 1;
    }
    const char *solvents[] = {"C1CCOC1", "COCCOC"};
    double weights[] = {0.5, 0.5};
    double y = 0.0;
    st = molsets_model_predict(model, solvents, weights, 2, "F[P-](F)(F)(F)(F)F.[Li+]", 1.0, &y);
    molsets_model_free(model);
    if (st != MOLSETS_STATUS_OK) {
        fprintf(stderr, "predict failed (%d): %s\n", (int)st, molsets_last_error());
        return 1;
    }
    printf("%.17g\n", y);
    printf("%zu\n", molsets_candidate_count(28, 30));
    return 0;
}
