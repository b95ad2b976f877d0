/* tslint:disable */
/* eslint-disable */

export function edge_pairs(rows: number, cols: number, dist_km: number): Uint32Array;

export function heatwaves(daily_max_c: Float64Array, threshold_c: number, percentile: number, min_days: number): Uint32Array;

export function node_degrees(rows: number, cols: number, dist_km: number): Uint32Array;

export function t2m_field(rows: number, cols: number, hour: number, seed: bigint, noise_k: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly edge_pairs: (a: number, b: number, c: number) => [number, number, number, number];
    readonly heatwaves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly node_degrees: (a: number, b: number, c: number) => [number, number, number, number];
    readonly t2m_field: (a: number, b: number, c: number, d: bigint, e: number) => [number, number, number, number];
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
