/* tslint:disable */
/* eslint-disable */

/**
 * One planted two-dimensional LP and its solution.
 */
export class LpPicture {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly labels: Float64Array;
    readonly optimal: boolean;
    readonly r: Float64Array;
    readonly recovered: boolean;
    /**
     * Sample features, flattened `(x_i1, x_i2)` pairs.
     */
    readonly rows: Float64Array;
    readonly w_hat: Float64Array;
    readonly w_star: Float64Array;
}

export function amplification_curve(n: number, d: number, max_trials: number, reps: number, seed: number): Float64Array;

export function lp_picture(n: number, seed: number): LpPicture;

export function phase_heatmap(n_values: Uint32Array, d_values: Uint32Array, trials: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lppicture_free: (a: number, b: number) => void;
    readonly amplification_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly lp_picture: (a: number, b: number) => [number, number, number];
    readonly lppicture_labels: (a: number) => [number, number];
    readonly lppicture_optimal: (a: number) => number;
    readonly lppicture_r: (a: number) => [number, number];
    readonly lppicture_recovered: (a: number) => number;
    readonly lppicture_rows: (a: number) => [number, number];
    readonly lppicture_w_hat: (a: number) => [number, number];
    readonly lppicture_w_star: (a: number) => [number, number];
    readonly phase_heatmap: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
