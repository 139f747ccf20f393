/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_lppicture_free: (a: number, b: number) => void;
export const amplification_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const lp_picture: (a: number, b: number) => [number, number, number];
export const lppicture_labels: (a: number) => [number, number];
export const lppicture_optimal: (a: number) => number;
export const lppicture_r: (a: number) => [number, number];
export const lppicture_recovered: (a: number) => number;
export const lppicture_rows: (a: number) => [number, number];
export const lppicture_w_hat: (a: number) => [number, number];
export const lppicture_w_star: (a: number) => [number, number];
export const phase_heatmap: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
