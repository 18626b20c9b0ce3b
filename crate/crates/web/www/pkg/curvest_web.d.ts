/* tslint:disable */
/* eslint-disable */

/**
 * `[C_b(t_i)..., Ĉ_b(t_i)...]` at `t_i = t_max i / n`, `i = 1..=n`; NaN outside the domain.
 */
export function comparison_curves(b: number, t_max: number, n: number): Float64Array;

/**
 * Ellipsoid with semi-axes `(a, a, c)` in `R^3`, sampled on a `resolution²` grid.
 *
 * Returns `[sup H_{k+1}/H_k, C_0(r), r, excluded]` with `r` the largest sampled distance
 * to the center, followed by the ratio at every node in row-major order.
 */
export function ellipsoid_estimate(a: number, c: number, k: number, resolution: number): Float64Array;

/**
 * `Λ` for a curvature bound given as `const(c)`, `affine(a,b)` or `sqrt_growth(a)`.
 */
export function lambda(spec: string): number;

/**
 * `[t..., g'/g..., ψ'/ψ...]` on `points` nodes of `(0, T]`.
 */
export function sturm_curves(spec: string, t_end: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly comparison_curves: (a: number, b: number, c: number) => [number, number];
    readonly ellipsoid_estimate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly lambda: (a: number, b: number) => [number, number, number];
    readonly sturm_curves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
