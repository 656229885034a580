/* tslint:disable */
/* eslint-disable */

/**
 * Mean preparation time of both schemes against ring size, as `log10`
 * seconds, for `n = 2..=max_n`.
 */
export function scaling_curve(eta: number, p0: number, f_p: number, max_n: number): string;

/**
 * Runs `trials` seeded trials of the improved scheme and returns the
 * summary report.
 */
export function simulate_ladder(n: number, eta: number, trials: number, seed: number, microscopic: boolean): string;

/**
 * Success probability of each ladder step for `n = 2^{i+1}` ensembles;
 * small rings are also evaluated exactly.
 */
export function step_table(n: number, eta: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly scaling_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly simulate_ladder: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly step_table: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
