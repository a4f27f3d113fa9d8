/* Locates the first resonance poles of the reference delta shell.
   Build: cargo build -p gamow-ffi && cc -I crates/ffi/include crates/ffi/examples/poles.c \
          target/debug/libgamow_ffi.a -lpthread -ldl -lm -o poles */
#include <stdio.h>
#include "gamow.h"

int main(void) {
    GamowPotential *pot = NULL;
    GamowPoleSet *poles = NULL;
    if (gamow_potential_delta_shell(6.0, 1.0, &pot) != GAMOW_STATUS_OK ||
        gamow_poles_locate(pot, 20.0, -4.0, 1e-12, &poles) != GAMOW_STATUS_OK) {
        fprintf(stderr, "error: %s\n", gamow_last_error_message());
        return 1;
    }
    size_t len = 0;
    gamow_poles_len(poles, &len);
    for (size_t n = 1; n <= len; n++) {
        double re, im;
        gamow_poles_get(poles, (int64_t)n, &re, &im);
        printf("k_%zu = %.12f %+.12fi\n", n, re, im);
    }
    GamowPotential *bad = NULL;
    GamowStatus s = gamow_potential_delta_shell(-1.0, 1.0, &bad);
    printf("negative strength -> status %d: %s\n", (int)s, gamow_last_error_message());
    gamow_poles_free(poles);
    gamow_potential_free(pot);
    return 0;
}
